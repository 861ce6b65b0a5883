use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand::SeedableRng;

use crate::dataset::sample::Sample;
use crate::dataset::ClassIndexMask;
use crate::model::{BACKGROUND, NON_CORROSION};
use crate::nn::FeatureMap;

/// Magnitudes and probabilities of the five augmentations.
#[derive(Clone, Debug, PartialEq)]
pub struct AugmentConfig {
    pub probability: f64,
    pub scale_range: (f64, f64),
    pub max_rotation_degrees: f64,
    pub blur_sigma_range: (f64, f64),
    pub blur_kernel: usize,
    pub hue_shift: f64,
    pub saturation_range: (f64, f64),
    pub value_range: (f64, f64),
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            probability: 0.5,
            scale_range: (0.75, 1.25),
            max_rotation_degrees: 10.0,
            blur_sigma_range: (0.1, 1.5),
            blur_kernel: 5,
            hue_shift: 0.02,
            saturation_range: (0.9, 1.1),
            value_range: (0.9, 1.1),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct HsvJitter {
    pub hue_shift: f64,
    pub saturation: f64,
    pub value: f64,
}

/// Concrete random choices for one augmentation pass. `None` / `false` means
/// the corresponding transform is skipped.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct AugmentDraws {
    pub scale: Option<f64>,
    pub rotation_degrees: Option<f64>,
    pub flip: bool,
    pub blur_sigma: Option<f64>,
    pub hsv: Option<HsvJitter>,
}

impl AugmentDraws {
    pub fn identity() -> Self {
        Self::default()
    }

    pub fn sample<R: Rng + ?Sized>(rng: &mut R, cfg: &AugmentConfig) -> Self {
        let p = cfg.probability;
        let coin = |rng: &mut R| rng.random_bool(p.clamp(0.0, 1.0));
        let scale = coin(rng).then(|| rng.random_range(cfg.scale_range.0..=cfg.scale_range.1));
        let rotation_degrees = coin(rng)
            .then(|| rng.random_range(-cfg.max_rotation_degrees..=cfg.max_rotation_degrees));
        let flip = coin(rng);
        let blur_sigma =
            coin(rng).then(|| rng.random_range(cfg.blur_sigma_range.0..=cfg.blur_sigma_range.1));
        let hsv = coin(rng).then(|| HsvJitter {
            hue_shift: rng.random_range(-cfg.hue_shift..=cfg.hue_shift),
            saturation: rng.random_range(cfg.saturation_range.0..=cfg.saturation_range.1),
            value: rng.random_range(cfg.value_range.0..=cfg.value_range.1),
        });
        AugmentDraws {
            scale,
            rotation_degrees,
            flip,
            blur_sigma,
            hsv,
        }
    }

    fn has_warp(&self) -> bool {
        self.scale.is_some_and(|s| s != 1.0) || self.rotation_degrees.is_some_and(|r| r != 0.0)
    }
}

/// Per-sample RNG stream: the same `(seed, id)` always yields the same draws.
pub fn sample_rng(seed: u64, id: u32) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(u64::from(id));
    rng
}

pub fn augment<R: Rng + ?Sized>(sample: &Sample, rng: &mut R, cfg: &AugmentConfig) -> Sample {
    apply_augmentation(sample, &AugmentDraws::sample(rng, cfg), cfg)
}

pub fn apply_augmentation(sample: &Sample, draws: &AugmentDraws, cfg: &AugmentConfig) -> Sample {
    let mut out = sample.clone();
    if draws.has_warp() {
        let warp = Warp::new(
            out.height(),
            out.width(),
            draws.scale.unwrap_or(1.0),
            draws.rotation_degrees.unwrap_or(0.0),
        );
        out.image = warp_image(&out.image, &warp);
        out.element_mask = warp_mask(&out.element_mask, &warp, BACKGROUND);
        out.defect_mask = warp_mask(&out.defect_mask, &warp, NON_CORROSION);
    }
    if draws.flip {
        out.image = flip_image(&out.image);
        out.element_mask = out.element_mask.flip_horizontal();
        out.defect_mask = out.defect_mask.flip_horizontal();
    }
    if let Some(sigma) = draws.blur_sigma {
        out.image = gaussian_blur(&out.image, cfg.blur_kernel, sigma);
    }
    if let Some(j) = draws.hsv {
        hsv_jitter(&mut out.image, j);
    }
    out
}

/// Scale-and-rotate about the image center, expressed as the inverse map
/// from output pixel centers to source coordinates.
#[derive(Clone, Copy, Debug)]
pub struct Warp {
    height: usize,
    width: usize,
    inv_scale: f64,
    cos: f64,
    sin: f64,
}

impl Warp {
    pub fn new(height: usize, width: usize, scale: f64, rotation_degrees: f64) -> Self {
        let theta = rotation_degrees.to_radians();
        Warp {
            height,
            width,
            inv_scale: 1.0 / scale,
            cos: theta.cos(),
            sin: theta.sin(),
        }
    }

    /// Source `(y, x)` in continuous pixel coordinates for output pixel `(y, x)`.
    pub fn source(&self, y: usize, x: usize) -> (f64, f64) {
        let (cy, cx) = (self.height as f64 / 2.0, self.width as f64 / 2.0);
        let dy = y as f64 + 0.5 - cy;
        let dx = x as f64 + 0.5 - cx;
        let sx = (self.cos * dx + self.sin * dy) * self.inv_scale;
        let sy = (-self.sin * dx + self.cos * dy) * self.inv_scale;
        (cy + sy, cx + sx)
    }

    fn nearest(&self, y: usize, x: usize) -> Option<(usize, usize)> {
        let (sy, sx) = self.source(y, x);
        if sy < 0.0 || sx < 0.0 {
            return None;
        }
        let (iy, ix) = (sy.floor() as usize, sx.floor() as usize);
        (iy < self.height && ix < self.width).then_some((iy, ix))
    }
}

/// Nearest-neighbor warp of any per-pixel grid; pixels mapped from outside
/// the source take `fill`.
pub fn warp_nearest<T: Copy>(src: &[T], warp: &Warp, fill: T) -> Vec<T> {
    let (h, w) = (warp.height, warp.width);
    assert_eq!(src.len(), h * w);
    let mut out = Vec::with_capacity(h * w);
    for y in 0..h {
        for x in 0..w {
            out.push(match warp.nearest(y, x) {
                Some((iy, ix)) => src[iy * w + ix],
                None => fill,
            });
        }
    }
    out
}

pub fn warp_mask(mask: &ClassIndexMask, warp: &Warp, fill: u8) -> ClassIndexMask {
    ClassIndexMask::new(mask.height(), mask.width(), warp_nearest(mask.data(), warp, fill))
        .expect("warp preserves size")
}

/// Bilinear warp of the image; outside pixels take the per-image mean color.
pub fn warp_image(image: &FeatureMap<f32>, warp: &Warp) -> FeatureMap<f32> {
    let s = image.shape();
    let (h, w) = (s.height, s.width);
    let mean: Vec<f32> = (0..s.channels)
        .map(|c| image.plane(0, c).iter().sum::<f32>() / (h * w) as f32)
        .collect();
    let mut out = FeatureMap::zeros(s);
    for y in 0..h {
        for x in 0..w {
            let (sy, sx) = warp.source(y, x);
            if sy < 0.0 || sx < 0.0 || sy >= h as f64 || sx >= w as f64 {
                for (c, &m) in mean.iter().enumerate() {
                    out.set(0, c, y, x, m);
                }
                continue;
            }
            let fy = (sy - 0.5).max(0.0);
            let fx = (sx - 0.5).max(0.0);
            let y0 = (fy.floor() as usize).min(h - 1);
            let x0 = (fx.floor() as usize).min(w - 1);
            let y1 = (y0 + 1).min(h - 1);
            let x1 = (x0 + 1).min(w - 1);
            let ty = (fy - y0 as f64) as f32;
            let tx = (fx - x0 as f64) as f32;
            for c in 0..s.channels {
                let p = image.plane(0, c);
                let top = p[y0 * w + x0] * (1.0 - tx) + p[y0 * w + x1] * tx;
                let bottom = p[y1 * w + x0] * (1.0 - tx) + p[y1 * w + x1] * tx;
                out.set(0, c, y, x, top * (1.0 - ty) + bottom * ty);
            }
        }
    }
    out
}

pub fn flip_image(image: &FeatureMap<f32>) -> FeatureMap<f32> {
    let s = image.shape();
    FeatureMap::from_fn(s, |n, c, y, x| image.get(n, c, y, s.width - 1 - x))
}

/// Normalized 1-D Gaussian taps of odd length `size`.
pub fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let r = (size / 2) as f64;
    let taps: Vec<f64> = (0..size)
        .map(|i| {
            let d = i as f64 - r;
            (-d * d / (2.0 * sigma * sigma)).exp()
        })
        .collect();
    let total: f64 = taps.iter().sum();
    taps.into_iter().map(|t| t / total).collect()
}

/// Separable `size x size` Gaussian blur with replicated borders.
pub fn gaussian_blur(image: &FeatureMap<f32>, size: usize, sigma: f64) -> FeatureMap<f32> {
    let s = image.shape();
    let (h, w) = (s.height, s.width);
    let taps = gaussian_kernel(size, sigma);
    let r = (size / 2) as isize;
    let clampi = |v: isize, n: usize| v.clamp(0, n as isize - 1) as usize;
    let mut out = image.clone();
    for n in 0..s.batch {
        for c in 0..s.channels {
            let src = image.plane(n, c);
            let mut tmp = vec![0f32; h * w];
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0f64;
                    for (k, t) in taps.iter().enumerate() {
                        let xx = clampi(x as isize + k as isize - r, w);
                        acc += t * src[y * w + xx] as f64;
                    }
                    tmp[y * w + x] = acc as f32;
                }
            }
            let dst = out.plane_mut(n, c);
            for y in 0..h {
                for x in 0..w {
                    let mut acc = 0f64;
                    for (k, t) in taps.iter().enumerate() {
                        let yy = clampi(y as isize + k as isize - r, h);
                        acc += t * tmp[yy * w + x] as f64;
                    }
                    dst[y * w + x] = acc as f32;
                }
            }
        }
    }
    out
}

/// RGB in `[0,1]` to HSV with hue on the unit circle `[0, 1)`.
pub fn rgb_to_hsv(r: f64, g: f64, b: f64) -> (f64, f64, f64) {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let delta = max - min;
    let h = if delta <= 0.0 {
        0.0
    } else if max == r {
        ((g - b) / delta).rem_euclid(6.0) / 6.0
    } else if max == g {
        ((b - r) / delta + 2.0) / 6.0
    } else {
        ((r - g) / delta + 4.0) / 6.0
    };
    let s = if max <= 0.0 { 0.0 } else { delta / max };
    (h, s, max)
}

pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> (f64, f64, f64) {
    let h6 = h.rem_euclid(1.0) * 6.0;
    let i = h6.floor();
    let f = h6 - i;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    match i as u32 % 6 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    }
}

pub fn hsv_jitter(image: &mut FeatureMap<f32>, j: HsvJitter) {
    let s = image.shape();
    for y in 0..s.height {
        for x in 0..s.width {
            let px = |c| image.get(0, c, y, x) as f64;
            let (h, sat, v) = rgb_to_hsv(px(0), px(1), px(2));
            let (r, g, b) = hsv_to_rgb(
                h + j.hue_shift,
                (sat * j.saturation).clamp(0.0, 1.0),
                (v * j.value).clamp(0.0, 1.0),
            );
            for (c, val) in [r, g, b].into_iter().enumerate() {
                image.set(0, c, y, x, val as f32);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hsv_round_trip() {
        for &(r, g, b) in &[(0.1, 0.5, 0.9), (1.0, 0.0, 0.0), (0.3, 0.3, 0.3), (0.9, 0.8, 0.1)] {
            let (h, s, v) = rgb_to_hsv(r, g, b);
            let (r2, g2, b2) = hsv_to_rgb(h, s, v);
            assert!((r - r2).abs() < 1e-12 && (g - g2).abs() < 1e-12 && (b - b2).abs() < 1e-12);
        }
    }

    #[test]
    fn gaussian_kernel_is_normalized_and_symmetric() {
        let k = gaussian_kernel(5, 1.0);
        assert!((k.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!((k[0] - k[4]).abs() < 1e-15 && k[2] > k[1]);
    }

    #[test]
    fn identity_warp_maps_centers_to_themselves() {
        let w = Warp::new(6, 8, 1.0, 0.0);
        assert_eq!(w.source(2, 3), (2.5, 3.5));
    }
}
