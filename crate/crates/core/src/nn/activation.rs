use crate::error::{shape_err, Result};
use crate::nn::{FeatureMap, Real};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Activation {
    Relu,
    Sigmoid,
    /// Softmax across the channel axis at every pixel.
    ChannelSoftmax,
}

pub fn activation<T: Real>(input: &FeatureMap<T>, kind: Activation) -> Result<FeatureMap<T>> {
    match kind {
        Activation::Relu => Ok(relu(input)),
        Activation::Sigmoid => Ok(sigmoid(input)),
        Activation::ChannelSoftmax => channel_softmax(input),
    }
}

pub fn relu<T: Real>(input: &FeatureMap<T>) -> FeatureMap<T> {
    input.map(|v| v.max(T::zero()))
}

/// Gradient through ReLU given its *output* (zero where the unit was inactive).
pub fn relu_backward<T: Real>(output: &FeatureMap<T>, grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    let mut g = grad_out.clone();
    for (d, &y) in g.data_mut().iter_mut().zip(output.data()) {
        if y <= T::zero() {
            *d = T::zero();
        }
    }
    g
}

#[inline]
pub fn sigmoid_scalar<T: Real>(x: T) -> T {
    if x >= T::zero() {
        T::one() / (T::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (T::one() + e)
    }
}

pub fn sigmoid<T: Real>(input: &FeatureMap<T>) -> FeatureMap<T> {
    input.map(sigmoid_scalar)
}

pub fn sigmoid_backward<T: Real>(output: &FeatureMap<T>, grad_out: &FeatureMap<T>) -> FeatureMap<T> {
    let mut g = grad_out.clone();
    for (d, &s) in g.data_mut().iter_mut().zip(output.data()) {
        *d *= s * (T::one() - s);
    }
    g
}

pub fn channel_softmax<T: Real>(input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    let s = input.shape();
    if s.channels < 2 {
        return Err(shape_err!("channel softmax needs at least 2 channels, got {}", s.channels));
    }
    let plane = s.plane();
    let mut out = FeatureMap::zeros(s);
    let mut buf = vec![T::zero(); s.channels];
    for n in 0..s.batch {
        let src = input.sample(n);
        let dst = out.sample_mut(n);
        for p in 0..plane {
            let mut hi = T::neg_infinity();
            for c in 0..s.channels {
                hi = hi.max(src[c * plane + p]);
            }
            let mut total = T::zero();
            for (c, b) in buf.iter_mut().enumerate() {
                *b = (src[c * plane + p] - hi).exp();
                total += *b;
            }
            for (c, b) in buf.iter().enumerate() {
                dst[c * plane + p] = *b / total;
            }
        }
    }
    Ok(out)
}

/// Gradient through channel softmax given its output probabilities.
pub fn channel_softmax_backward<T: Real>(output: &FeatureMap<T>, grad_out: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    output.ensure_same_shape(grad_out, "softmax gradient")?;
    let s = output.shape();
    let plane = s.plane();
    let mut g = FeatureMap::zeros(s);
    for n in 0..s.batch {
        let p = output.sample(n);
        let d = grad_out.sample(n);
        let o = g.sample_mut(n);
        for px in 0..plane {
            let mut dot = T::zero();
            for c in 0..s.channels {
                dot += p[c * plane + px] * d[c * plane + px];
            }
            for c in 0..s.channels {
                let i = c * plane + px;
                o[i] = p[i] * (d[i] - dot);
            }
        }
    }
    Ok(g)
}
