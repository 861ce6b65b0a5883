use rand::Rng;

use crate::error::{shape_err, Result};
use crate::nn::{FeatureMap, Param, Parameterized, Real, Shape};

/// 2-D cross-correlation layer (no kernel flip), square kernels.
#[derive(Clone, Debug)]
pub struct Conv2d<T> {
    pub weight: Param<T>,
    pub bias: Option<Param<T>>,
    pub stride: usize,
    pub padding: usize,
}

impl<T: Real> Conv2d<T> {
    /// Zero-initialised layer; call [`Conv2d::init_kaiming`] before training.
    pub fn new(
        prefix: &str,
        in_channels: usize,
        out_channels: usize,
        kernel: usize,
        stride: usize,
        padding: usize,
        bias: bool,
    ) -> Self {
        Conv2d {
            weight: Param::new(
                format!("{prefix}.weight"),
                &[out_channels, in_channels, kernel, kernel],
                T::zero(),
                true,
            ),
            bias: bias.then(|| Param::new(format!("{prefix}.bias"), &[out_channels], T::zero(), true)),
            stride,
            padding,
        }
    }

    pub fn init_kaiming(&mut self, rng: &mut impl Rng) {
        let fan_in = self.in_channels() * self.kernel() * self.kernel();
        self.weight.init_kaiming(fan_in, rng);
        if let Some(b) = &mut self.bias {
            b.value.iter_mut().for_each(|v| *v = T::zero());
        }
    }

    pub fn out_channels(&self) -> usize {
        self.weight.shape[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape[2]
    }

    pub fn output_size(&self, height: usize, width: usize) -> Result<(usize, usize)> {
        output_size(height, width, self.kernel(), self.kernel(), self.stride, self.padding)
    }

    pub fn forward(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        conv2d(input, &self.weight, self.bias.as_ref(), self.stride, self.padding)
    }

    /// Accumulates parameter gradients and returns the input gradient.
    pub fn backward(&mut self, input: &FeatureMap<T>, grad_out: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        let grads = conv2d_backward(input, &self.weight, self.stride, self.padding, grad_out)?;
        for (g, d) in self.weight.grad.iter_mut().zip(&grads.weight) {
            *g += *d;
        }
        if let Some(b) = &mut self.bias {
            for (g, d) in b.grad.iter_mut().zip(&grads.bias) {
                *g += *d;
            }
        }
        Ok(grads.input)
    }
}

impl<T> Parameterized<T> for Conv2d<T> {
    fn params(&self) -> Vec<&Param<T>> {
        std::iter::once(&self.weight).chain(self.bias.as_ref()).collect()
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        std::iter::once(&mut self.weight).chain(self.bias.as_mut()).collect()
    }
}

pub fn output_size(
    height: usize,
    width: usize,
    kh: usize,
    kw: usize,
    stride: usize,
    padding: usize,
) -> Result<(usize, usize)> {
    if stride == 0 {
        return Err(shape_err!("stride must be at least 1"));
    }
    let ph = height + 2 * padding;
    let pw = width + 2 * padding;
    if ph < kh || pw < kw {
        return Err(shape_err!(
            "kernel {kh}x{kw} larger than padded input {ph}x{pw}"
        ));
    }
    Ok(((ph - kh) / stride + 1, (pw - kw) / stride + 1))
}

struct Geometry {
    in_channels: usize,
    out_channels: usize,
    kh: usize,
    kw: usize,
    height: usize,
    width: usize,
    out_h: usize,
    out_w: usize,
    stride: usize,
    padding: usize,
}

impl Geometry {
    fn new(input: Shape, weight: &[usize], stride: usize, padding: usize) -> Result<Self> {
        if weight.len() != 4 {
            return Err(shape_err!("conv weight must be 4-D, got {weight:?}"));
        }
        if input.channels != weight[1] {
            return Err(shape_err!(
                "conv expects {} input channels, got {}",
                weight[1],
                input.channels
            ));
        }
        let (out_h, out_w) = output_size(input.height, input.width, weight[2], weight[3], stride, padding)?;
        Ok(Geometry {
            in_channels: weight[1],
            out_channels: weight[0],
            kh: weight[2],
            kw: weight[3],
            height: input.height,
            width: input.width,
            out_h,
            out_w,
            stride,
            padding,
        })
    }

    fn is_pointwise(&self) -> bool {
        self.kh == 1 && self.kw == 1 && self.stride == 1 && self.padding == 0
    }

    fn patch_len(&self) -> usize {
        self.in_channels * self.kh * self.kw
    }

    fn out_plane(&self) -> usize {
        self.out_h * self.out_w
    }

    /// Source coordinate for output index `o` and kernel tap `k`, if inside the input.
    #[inline]
    fn source(&self, o: usize, k: usize, limit: usize) -> Option<usize> {
        let pos = (o * self.stride + k) as isize - self.padding as isize;
        (pos >= 0 && (pos as usize) < limit).then_some(pos as usize)
    }

    fn im2col<T: Real>(&self, sample: &[T], cols: &mut [T]) {
        let plane = self.height * self.width;
        let mut row = 0;
        for c in 0..self.in_channels {
            let src = &sample[c * plane..(c + 1) * plane];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let dst = &mut cols[row * self.out_plane()..(row + 1) * self.out_plane()];
                    for oy in 0..self.out_h {
                        let line = &mut dst[oy * self.out_w..(oy + 1) * self.out_w];
                        match self.source(oy, ky, self.height) {
                            None => line.iter_mut().for_each(|v| *v = T::zero()),
                            Some(iy) => {
                                for (ox, v) in line.iter_mut().enumerate() {
                                    *v = match self.source(ox, kx, self.width) {
                                        Some(ix) => src[iy * self.width + ix],
                                        None => T::zero(),
                                    };
                                }
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }

    fn col2im<T: Real>(&self, cols: &[T], sample: &mut [T]) {
        let plane = self.height * self.width;
        let mut row = 0;
        for c in 0..self.in_channels {
            let dst = &mut sample[c * plane..(c + 1) * plane];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let src = &cols[row * self.out_plane()..(row + 1) * self.out_plane()];
                    for oy in 0..self.out_h {
                        let Some(iy) = self.source(oy, ky, self.height) else {
                            continue;
                        };
                        for ox in 0..self.out_w {
                            if let Some(ix) = self.source(ox, kx, self.width) {
                                dst[iy * self.width + ix] += src[oy * self.out_w + ox];
                            }
                        }
                    }
                    row += 1;
                }
            }
        }
    }
}

/// Batched cross-correlation with zero padding.
pub fn conv2d<T: Real>(
    input: &FeatureMap<T>,
    weight: &Param<T>,
    bias: Option<&Param<T>>,
    stride: usize,
    padding: usize,
) -> Result<FeatureMap<T>> {
    let g = Geometry::new(input.shape(), &weight.shape, stride, padding)?;
    if let Some(b) = bias {
        if b.value.len() != g.out_channels {
            return Err(shape_err!(
                "conv bias has {} entries for {} output channels",
                b.value.len(),
                g.out_channels
            ));
        }
    }
    let out_shape = Shape::new(input.batch(), g.out_channels, g.out_h, g.out_w);
    let mut out = FeatureMap::zeros(out_shape);
    let mut cols = if g.is_pointwise() {
        Vec::new()
    } else {
        vec![T::zero(); g.patch_len() * g.out_plane()]
    };
    for n in 0..input.batch() {
        let patches: &[T] = if g.is_pointwise() {
            input.sample(n)
        } else {
            g.im2col(input.sample(n), &mut cols);
            &cols
        };
        let dst = out.sample_mut(n);
        if let Some(b) = bias {
            for (oc, chunk) in dst.chunks_mut(g.out_plane()).enumerate() {
                chunk.iter_mut().for_each(|v| *v = b.value[oc]);
            }
        }
        T::gemm(
            g.out_channels,
            g.patch_len(),
            g.out_plane(),
            T::one(),
            &weight.value,
            false,
            patches,
            false,
            T::one(),
            dst,
        );
    }
    Ok(out)
}

/// Gradients of a convolution with respect to its input, weight and bias.
#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    pub input: FeatureMap<T>,
    pub weight: Vec<T>,
    pub bias: Vec<T>,
}

pub fn conv2d_backward<T: Real>(
    input: &FeatureMap<T>,
    weight: &Param<T>,
    stride: usize,
    padding: usize,
    grad_out: &FeatureMap<T>,
) -> Result<ConvGrads<T>> {
    let g = Geometry::new(input.shape(), &weight.shape, stride, padding)?;
    let expected = Shape::new(input.batch(), g.out_channels, g.out_h, g.out_w);
    if grad_out.shape() != expected {
        return Err(shape_err!(
            "conv output gradient {} does not match output {expected}",
            grad_out.shape()
        ));
    }
    let mut grad_input = FeatureMap::zeros(input.shape());
    let mut grad_weight = vec![T::zero(); weight.value.len()];
    let mut grad_bias = vec![T::zero(); g.out_channels];
    let mut cols = vec![T::zero(); g.patch_len() * g.out_plane()];
    let mut grad_cols = vec![T::zero(); g.patch_len() * g.out_plane()];

    for n in 0..input.batch() {
        let go = grad_out.sample(n);
        for (oc, chunk) in go.chunks(g.out_plane()).enumerate() {
            grad_bias[oc] += chunk.iter().copied().sum::<T>();
        }
        let patches: &[T] = if g.is_pointwise() {
            input.sample(n)
        } else {
            g.im2col(input.sample(n), &mut cols);
            &cols
        };
        // dW[oc, K] += dY[oc, P] * cols[K, P]^T
        T::gemm(
            g.out_channels,
            g.out_plane(),
            g.patch_len(),
            T::one(),
            go,
            false,
            patches,
            true,
            T::one(),
            &mut grad_weight,
        );
        // dcols[K, P] = W[oc, K]^T * dY[oc, P]
        if g.is_pointwise() {
            T::gemm(
                g.patch_len(),
                g.out_channels,
                g.out_plane(),
                T::one(),
                &weight.value,
                true,
                go,
                false,
                T::zero(),
                grad_input.sample_mut(n),
            );
        } else {
            T::gemm(
                g.patch_len(),
                g.out_channels,
                g.out_plane(),
                T::one(),
                &weight.value,
                true,
                go,
                false,
                T::zero(),
                &mut grad_cols,
            );
            g.col2im(&grad_cols, grad_input.sample_mut(n));
        }
    }
    Ok(ConvGrads {
        input: grad_input,
        weight: grad_weight,
        bias: grad_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_sum_center_and_corner() {
        let mut conv = Conv2d::<f64>::new("c", 1, 1, 3, 1, 1, true);
        conv.weight.value.iter_mut().for_each(|v| *v = 1.0);
        let x = FeatureMap::filled(Shape::new(1, 1, 3, 3), 1.0);
        let y = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), Shape::new(1, 1, 3, 3));
        assert_eq!(y.get(0, 0, 1, 1), 9.0);
        assert_eq!(y.get(0, 0, 0, 0), 4.0);
        assert_eq!(y.get(0, 0, 0, 1), 6.0);
    }

    #[test]
    fn pointwise_identity_kernel() {
        let mut conv = Conv2d::<f32>::new("c", 1, 1, 1, 1, 0, true);
        conv.weight.value[0] = 1.0;
        let x = FeatureMap::from_fn(Shape::new(2, 1, 4, 3), |n, _, y, x| (n * 31 + y * 7 + x) as f32 * 0.13 - 1.0);
        assert_eq!(conv.forward(&x).unwrap(), x);
    }

    #[test]
    fn channel_mismatch_is_a_shape_error() {
        let conv = Conv2d::<f32>::new("c", 3, 2, 3, 1, 1, false);
        let x = FeatureMap::zeros(Shape::new(1, 2, 5, 5));
        assert!(matches!(conv.forward(&x), Err(crate::Error::Shape(_))));
    }

    #[test]
    fn non_positive_output_is_a_shape_error() {
        let conv = Conv2d::<f32>::new("c", 1, 1, 5, 1, 0, false);
        let x = FeatureMap::zeros(Shape::new(1, 1, 3, 3));
        assert!(matches!(conv.forward(&x), Err(crate::Error::Shape(_))));
        assert!(output_size(4, 4, 3, 3, 0, 1).is_err());
    }

    #[test]
    fn strided_output_size() {
        assert_eq!(output_size(64, 64, 3, 3, 2, 1).unwrap(), (32, 32));
        assert_eq!(output_size(7, 5, 3, 3, 2, 1).unwrap(), (4, 3));
        assert_eq!(output_size(520, 520, 3, 3, 1, 1).unwrap(), (520, 520));
    }
}
