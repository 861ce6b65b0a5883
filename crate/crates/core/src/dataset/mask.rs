use crate::error::{data_err, shape_err, Result};
use crate::model::TaskSpec;
use crate::nn::{FeatureMap, Real, Shape};

/// Dense per-pixel class indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct ClassIndexMask {
    height: usize,
    width: usize,
    data: Vec<u8>,
}

impl ClassIndexMask {
    pub fn new(height: usize, width: usize, data: Vec<u8>) -> Result<Self> {
        if data.len() != height * width {
            return Err(shape_err!(
                "mask buffer of {} entries does not match {height}x{width}",
                data.len()
            ));
        }
        Ok(ClassIndexMask {
            height,
            width,
            data,
        })
    }

    pub fn filled(height: usize, width: usize, class: u8) -> Self {
        ClassIndexMask {
            height,
            width,
            data: vec![class; height * width],
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, y: usize, x: usize) -> u8 {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, y: usize, x: usize, class: u8) {
        self.data[y * self.width + x] = class;
    }

    pub fn same_size(&self, other: &ClassIndexMask) -> bool {
        (self.height, self.width) == (other.height, other.width)
    }

    /// Fails on the first entry `>= class_count`, naming the pixel.
    pub fn validate(&self, class_count: usize) -> Result<()> {
        match self.data.iter().position(|&c| c as usize >= class_count) {
            None => Ok(()),
            Some(i) => Err(data_err!(
                "mask value {} at pixel (row {}, col {}) outside [0, {class_count})",
                self.data[i],
                i / self.width,
                i % self.width
            )),
        }
    }

    /// Pixel count per class.
    pub fn histogram(&self, class_count: usize) -> Vec<u64> {
        let mut h = vec![0u64; class_count];
        for &c in &self.data {
            if (c as usize) < class_count {
                h[c as usize] += 1;
            }
        }
        h
    }

    pub fn flip_horizontal(&self) -> ClassIndexMask {
        let mut out = self.clone();
        for y in 0..self.height {
            out.data[y * self.width..(y + 1) * self.width].reverse();
        }
        out
    }
}

/// One-hot encodes `mask` into a `1 x N_i x H x W` tensor.
pub fn one_hot<T: Real>(mask: &ClassIndexMask, task: &TaskSpec) -> Result<FeatureMap<T>> {
    one_hot_classes(mask, task.class_count())
}

pub fn one_hot_classes<T: Real>(mask: &ClassIndexMask, class_count: usize) -> Result<FeatureMap<T>> {
    mask.validate(class_count)?;
    let plane = mask.height * mask.width;
    let mut out = FeatureMap::zeros(Shape::new(1, class_count, mask.height, mask.width));
    let data = out.data_mut();
    for (p, &c) in mask.data.iter().enumerate() {
        data[c as usize * plane + p] = T::one();
    }
    Ok(out)
}

/// Per-pixel argmax over channels of sample `n`; ties go to the lowest class.
pub fn argmax_mask<T: Real>(scores: &FeatureMap<T>, n: usize) -> Result<ClassIndexMask> {
    let s = scores.shape();
    if n >= s.batch {
        return Err(shape_err!("sample {n} outside batch of {}", s.batch));
    }
    if s.channels == 0 || s.channels > 256 {
        return Err(shape_err!("cannot take argmax over {} channels", s.channels));
    }
    let plane = s.plane();
    let src = scores.sample(n);
    let mut data = vec![0u8; plane];
    for (p, d) in data.iter_mut().enumerate() {
        let mut best = 0;
        let mut best_v = src[p];
        for c in 1..s.channels {
            let v = src[c * plane + p];
            if v > best_v {
                best = c;
                best_v = v;
            }
        }
        *d = best as u8;
    }
    ClassIndexMask::new(s.height, s.width, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_hot_single_pixel() {
        let m = ClassIndexMask::new(1, 1, vec![2]).unwrap();
        let t = one_hot_classes::<f32>(&m, 3).unwrap();
        assert_eq!(t.data(), &[0.0, 0.0, 1.0]);
    }

    #[test]
    fn one_hot_rejects_out_of_range() {
        let m = ClassIndexMask::new(1, 2, vec![0, 9]).unwrap();
        let err = one_hot::<f32>(&m, &TaskSpec::element()).unwrap_err();
        assert!(err.to_string().contains("col 1"), "{err}");
    }

    #[test]
    fn argmax_tie_goes_to_class_zero() {
        let s = FeatureMap::<f64>::from_vec(Shape::new(1, 2, 1, 1), vec![0.5, 0.5]).unwrap();
        assert_eq!(argmax_mask(&s, 0).unwrap().data(), &[0]);
    }

    #[test]
    fn flip_is_an_involution() {
        let m = ClassIndexMask::new(2, 3, vec![0, 1, 2, 3, 4, 5]).unwrap();
        assert_eq!(m.flip_horizontal().data(), &[2, 1, 0, 5, 4, 3]);
        assert_eq!(m.flip_horizontal().flip_horizontal(), m);
    }
}
