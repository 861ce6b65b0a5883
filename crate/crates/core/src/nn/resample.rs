use crate::error::{shape_err, Error, Result};
use crate::nn::{FeatureMap, Real, Shape};

/// Interpolation taps for one output coordinate along one axis.
#[derive(Clone, Debug)]
struct Taps<T> {
    index: Vec<usize>,
    weight: Vec<T>,
}

/// Half-pixel source coordinate of output index `dst`.
fn source_coord(dst: usize, in_len: usize, out_len: usize) -> f64 {
    (dst as f64 + 0.5) * (in_len as f64 / out_len as f64) - 0.5
}

fn linear_taps<T: Real>(in_len: usize, out_len: usize) -> Vec<Taps<T>> {
    (0..out_len)
        .map(|o| {
            let src = source_coord(o, in_len, out_len).max(0.0);
            let i0 = (src.floor() as usize).min(in_len - 1);
            let i1 = (i0 + 1).min(in_len - 1);
            let frac = (src - i0 as f64).clamp(0.0, 1.0);
            Taps {
                index: vec![i0, i1],
                weight: vec![T::lit(1.0 - frac), T::lit(frac)],
            }
        })
        .collect()
}

/// Catmull-Rom style cubic convolution kernel with parameter `a`.
pub fn cubic_kernel(x: f64, a: f64) -> f64 {
    let x = x.abs();
    if x <= 1.0 {
        ((a + 2.0) * x - (a + 3.0)) * x * x + 1.0
    } else if x < 2.0 {
        ((a * x - 5.0 * a) * x + 8.0 * a) * x - 4.0 * a
    } else {
        0.0
    }
}

pub const BICUBIC_A: f64 = -0.5;

fn cubic_taps<T: Real>(in_len: usize, out_len: usize) -> Vec<Taps<T>> {
    (0..out_len)
        .map(|o| {
            let src = source_coord(o, in_len, out_len);
            let base = src.floor();
            let t = src - base;
            let mut index = Vec::with_capacity(4);
            let mut weight = Vec::with_capacity(4);
            for k in -1i64..=2 {
                let pos = (base as i64 + k).clamp(0, in_len as i64 - 1) as usize;
                index.push(pos);
                weight.push(T::lit(cubic_kernel(k as f64 - t, BICUBIC_A)));
            }
            Taps { index, weight }
        })
        .collect()
}

fn apply_separable<T: Real>(input: &FeatureMap<T>, rows: &[Taps<T>], cols: &[Taps<T>]) -> FeatureMap<T> {
    let s = input.shape();
    let (oh, ow) = (rows.len(), cols.len());
    let out_shape = Shape::new(s.batch, s.channels, oh, ow);
    let mut out = FeatureMap::zeros(out_shape);
    let mut tmp = vec![T::zero(); s.height * ow];
    for n in 0..s.batch {
        for c in 0..s.channels {
            let src = input.plane(n, c);
            for y in 0..s.height {
                let line = &src[y * s.width..(y + 1) * s.width];
                for (x, taps) in cols.iter().enumerate() {
                    let mut acc = T::zero();
                    for (&i, &w) in taps.index.iter().zip(&taps.weight) {
                        acc += w * line[i];
                    }
                    tmp[y * ow + x] = acc;
                }
            }
            let dst = out.plane_mut(n, c);
            for (y, taps) in rows.iter().enumerate() {
                let line = &mut dst[y * ow..(y + 1) * ow];
                for (&i, &w) in taps.index.iter().zip(&taps.weight) {
                    let srow = &tmp[i * ow..(i + 1) * ow];
                    for (d, &v) in line.iter_mut().zip(srow) {
                        *d += w * v;
                    }
                }
            }
        }
    }
    out
}

fn transpose_separable<T: Real>(grad_out: &FeatureMap<T>, in_shape: Shape, rows: &[Taps<T>], cols: &[Taps<T>]) -> FeatureMap<T> {
    let s = grad_out.shape();
    let (ih, iw) = (in_shape.height, in_shape.width);
    let mut grad_in = FeatureMap::zeros(in_shape);
    let mut tmp = vec![T::zero(); ih * s.width];
    for n in 0..s.batch {
        for c in 0..s.channels {
            tmp.iter_mut().for_each(|v| *v = T::zero());
            let go = grad_out.plane(n, c);
            for (y, taps) in rows.iter().enumerate() {
                let line = &go[y * s.width..(y + 1) * s.width];
                for (&i, &w) in taps.index.iter().zip(&taps.weight) {
                    for (d, &v) in tmp[i * s.width..(i + 1) * s.width].iter_mut().zip(line) {
                        *d += w * v;
                    }
                }
            }
            let dst = grad_in.plane_mut(n, c);
            for y in 0..ih {
                let line = &tmp[y * s.width..(y + 1) * s.width];
                let out_line = &mut dst[y * iw..(y + 1) * iw];
                for (x, taps) in cols.iter().enumerate() {
                    for (&i, &w) in taps.index.iter().zip(&taps.weight) {
                        out_line[i] += w * line[x];
                    }
                }
            }
        }
    }
    grad_in
}

fn check_positive(out_height: usize, out_width: usize, input: Shape) -> Result<()> {
    if out_height == 0 || out_width == 0 || input.height == 0 || input.width == 0 {
        return Err(shape_err!(
            "cannot resize {input} to {out_height}x{out_width}"
        ));
    }
    Ok(())
}

/// Half-pixel bilinear resize in either direction.
pub fn resize_bilinear<T: Real>(input: &FeatureMap<T>, out_height: usize, out_width: usize) -> Result<FeatureMap<T>> {
    let s = input.shape();
    check_positive(out_height, out_width, s)?;
    let rows = linear_taps(s.height, out_height);
    let cols = linear_taps(s.width, out_width);
    Ok(apply_separable(input, &rows, &cols))
}

pub fn resize_bilinear_backward<T: Real>(grad_out: &FeatureMap<T>, input_shape: Shape) -> Result<FeatureMap<T>> {
    let s = grad_out.shape();
    check_positive(s.height, s.width, input_shape)?;
    if (s.batch, s.channels) != (input_shape.batch, input_shape.channels) {
        return Err(shape_err!("resize gradient {s} incompatible with input {input_shape}"));
    }
    let rows = linear_taps(input_shape.height, s.height);
    let cols = linear_taps(input_shape.width, s.width);
    Ok(transpose_separable(grad_out, input_shape, &rows, &cols))
}

/// Bilinear upsampling; refuses to shrink either axis.
pub fn bilinear_upsample<T: Real>(input: &FeatureMap<T>, out_height: usize, out_width: usize) -> Result<FeatureMap<T>> {
    if out_height < input.height() || out_width < input.width() {
        return Err(Error::Precondition(format!(
            "bilinear upsample from {}x{} to smaller {out_height}x{out_width}",
            input.height(),
            input.width()
        )));
    }
    resize_bilinear(input, out_height, out_width)
}

pub fn bilinear_upsample_backward<T: Real>(grad_out: &FeatureMap<T>, input_shape: Shape) -> Result<FeatureMap<T>> {
    resize_bilinear_backward(grad_out, input_shape)
}

/// Bicubic (cubic convolution, a = -0.5) resize with replicated borders.
pub fn bicubic_resize<T: Real>(input: &FeatureMap<T>, out_height: usize, out_width: usize) -> Result<FeatureMap<T>> {
    let s = input.shape();
    check_positive(out_height, out_width, s)?;
    let rows = cubic_taps(s.height, out_height);
    let cols = cubic_taps(s.width, out_width);
    Ok(apply_separable(input, &rows, &cols))
}
