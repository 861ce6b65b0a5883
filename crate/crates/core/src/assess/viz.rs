use crate::dataset::ClassIndexMask;
use crate::error::{Error, Result};
use crate::nn::{bicubic_resize, FeatureMap, Real, Shape};

/// An 8-bit grayscale image.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct GrayImage {
    pub height: usize,
    pub width: usize,
    pub data: Vec<u8>,
}

/// Channel `channel` of the first sample, min-max rescaled to `[0, 255]`.
/// A constant channel maps to zeros.
pub fn rescale_channel<T: Real>(map: &FeatureMap<T>, channel: usize) -> Result<FeatureMap<f64>> {
    let s = map.shape();
    if channel >= s.channels {
        return Err(Error::Index(format!(
            "channel {channel} outside a map with {} channels",
            s.channels
        )));
    }
    if s.batch == 0 {
        return Err(Error::Index("feature map has no samples".into()));
    }
    let plane: Vec<f64> = map.plane(0, channel).iter().map(|v| v.to_f64_lossy()).collect();
    let lo = plane.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = plane.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let span = hi - lo;
    let scaled = plane
        .iter()
        .map(|&v| if span > 0.0 { 255.0 * (v - lo) / span } else { 0.0 })
        .collect();
    FeatureMap::from_vec(Shape::new(1, 1, s.height, s.width), scaled)
}

/// Rescaled channel, bicubic-resized to `out_size` and rounded to 8 bits.
pub fn viz_features<T: Real>(map: &FeatureMap<T>, channel: usize, out_size: (usize, usize)) -> Result<GrayImage> {
    let scaled = rescale_channel(map, channel)?;
    let resized = bicubic_resize(&scaled, out_size.0, out_size.1)?;
    Ok(GrayImage {
        height: out_size.0,
        width: out_size.1,
        data: resized
            .data()
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect(),
    })
}

/// Attention mask values in `[0, 1]` scaled to 8 bits without min-max stretching.
pub fn viz_mask<T: Real>(mask: &FeatureMap<T>, channel: usize, out_size: (usize, usize)) -> Result<GrayImage> {
    let s = mask.shape();
    if channel >= s.channels || s.batch == 0 {
        return Err(Error::Index(format!("channel {channel} outside {s}")));
    }
    let plane: Vec<f64> = mask.plane(0, channel).iter().map(|v| 255.0 * v.to_f64_lossy()).collect();
    let map = FeatureMap::from_vec(Shape::new(1, 1, s.height, s.width), plane)?;
    let resized = bicubic_resize(&map, out_size.0, out_size.1)?;
    Ok(GrayImage {
        height: out_size.0,
        width: out_size.1,
        data: resized
            .data()
            .iter()
            .map(|v| v.round().clamp(0.0, 255.0) as u8)
            .collect(),
    })
}

/// Class-index mask painted with `palette[class]`, as packed RGB.
pub fn colorize_mask(mask: &ClassIndexMask, palette: &[[u8; 3]]) -> Vec<u8> {
    mask.data()
        .iter()
        .flat_map(|&c| palette.get(c as usize).copied().unwrap_or([255, 0, 255]))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_channel_is_black() {
        let m = FeatureMap::<f32>::filled(Shape::new(1, 2, 3, 3), 4.0);
        let img = viz_features(&m, 1, (6, 6)).unwrap();
        assert!(img.data.iter().all(|&v| v == 0));
    }

    #[test]
    fn two_valued_channel_hits_endpoints() {
        let m = FeatureMap::<f64>::from_vec(Shape::new(1, 1, 1, 2), vec![-1.0, 3.0]).unwrap();
        assert_eq!(rescale_channel(&m, 0).unwrap().data(), &[0.0, 255.0]);
    }

    #[test]
    fn bad_channel_is_index_error() {
        let m = FeatureMap::<f32>::zeros(Shape::new(1, 2, 2, 2));
        assert!(matches!(viz_features(&m, 2, (2, 2)), Err(Error::Index(_))));
    }
}
