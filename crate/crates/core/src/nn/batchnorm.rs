use crate::error::{shape_err, Result};
use crate::nn::{FeatureMap, Param, Parameterized, Real};

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    /// Batch statistics; running moments are updated.
    Train,
    /// Running moments; the layer is read-only.
    Eval,
}

/// Per-channel batch normalisation over `batch x height x width`.
#[derive(Clone, Debug)]
pub struct BatchNorm2d<T> {
    pub scale: Param<T>,
    pub shift: Param<T>,
    pub running_mean: Param<T>,
    pub running_var: Param<T>,
    pub momentum: T,
    pub epsilon: T,
}

/// Values saved by a train-mode forward pass for the backward pass.
#[derive(Clone, Debug)]
pub struct BatchNormCache<T> {
    normalized: FeatureMap<T>,
    inv_std: Vec<T>,
}

impl<T: Real> BatchNorm2d<T> {
    pub fn new(prefix: &str, channels: usize) -> Self {
        BatchNorm2d {
            scale: Param::new(format!("{prefix}.scale"), &[channels], T::one(), true),
            shift: Param::new(format!("{prefix}.shift"), &[channels], T::zero(), true),
            running_mean: Param::new(format!("{prefix}.running_mean"), &[channels], T::zero(), false),
            running_var: Param::new(format!("{prefix}.running_var"), &[channels], T::one(), false),
            momentum: T::lit(DEFAULT_MOMENTUM),
            epsilon: T::lit(DEFAULT_EPSILON),
        }
    }

    pub fn channels(&self) -> usize {
        self.scale.value.len()
    }

    fn check(&self, input: &FeatureMap<T>) -> Result<()> {
        if input.channels() != self.channels() {
            return Err(shape_err!(
                "batch norm over {} channels applied to {} channels",
                self.channels(),
                input.channels()
            ));
        }
        Ok(())
    }

    /// Normalises with batch statistics and folds them into the running moments.
    pub fn forward_train(&mut self, input: &FeatureMap<T>) -> Result<(FeatureMap<T>, BatchNormCache<T>)> {
        self.check(input)?;
        let s = input.shape();
        let count = s.batch * s.plane();
        let m = T::lit(count as f64);
        let mut normalized = FeatureMap::zeros(s);
        let mut out = FeatureMap::zeros(s);
        let mut inv_std = vec![T::zero(); s.channels];
        for c in 0..s.channels {
            let mut mean = T::zero();
            for n in 0..s.batch {
                mean += input.plane(n, c).iter().copied().sum::<T>();
            }
            mean /= m;
            let mut var = T::zero();
            for n in 0..s.batch {
                for &v in input.plane(n, c) {
                    var += (v - mean) * (v - mean);
                }
            }
            var /= m;
            let istd = T::one() / (var + self.epsilon).sqrt();
            inv_std[c] = istd;
            let (g, b) = (self.scale.value[c], self.shift.value[c]);
            for n in 0..s.batch {
                let src = input.plane(n, c);
                let xh = normalized.plane_mut(n, c);
                for (h, &v) in xh.iter_mut().zip(src) {
                    *h = (v - mean) * istd;
                }
                let xh = normalized.plane(n, c).to_vec();
                for (o, h) in out.plane_mut(n, c).iter_mut().zip(xh) {
                    *o = g * h + b;
                }
            }
            let unbiased = if count > 1 {
                var * m / (m - T::one())
            } else {
                var
            };
            let mom = self.momentum;
            self.running_mean.value[c] = (T::one() - mom) * self.running_mean.value[c] + mom * mean;
            self.running_var.value[c] = (T::one() - mom) * self.running_var.value[c] + mom * unbiased;
        }
        Ok((out, BatchNormCache { normalized, inv_std }))
    }

    pub fn forward_eval(&self, input: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        self.check(input)?;
        let s = input.shape();
        let mut out = input.clone();
        for c in 0..s.channels {
            let var = self.running_var.value[c].max(T::zero());
            let istd = T::one() / (var + self.epsilon).sqrt();
            let a = self.scale.value[c] * istd;
            let b = self.shift.value[c] - a * self.running_mean.value[c];
            for n in 0..s.batch {
                out.plane_mut(n, c).iter_mut().for_each(|v| *v = a * *v + b);
            }
        }
        Ok(out)
    }

    pub fn forward(&mut self, input: &FeatureMap<T>, mode: Mode) -> Result<FeatureMap<T>> {
        match mode {
            Mode::Train => self.forward_train(input).map(|(y, _)| y),
            Mode::Eval => self.forward_eval(input),
        }
    }

    /// Train-mode backward pass; accumulates scale/shift gradients.
    pub fn backward(&mut self, cache: &BatchNormCache<T>, grad_out: &FeatureMap<T>) -> Result<FeatureMap<T>> {
        cache.normalized.ensure_same_shape(grad_out, "batch norm gradient")?;
        let s = grad_out.shape();
        let m = T::lit((s.batch * s.plane()) as f64);
        let mut grad_in = FeatureMap::zeros(s);
        for c in 0..s.channels {
            let mut sum_dy = T::zero();
            let mut sum_dy_xh = T::zero();
            for n in 0..s.batch {
                for (&dy, &xh) in grad_out.plane(n, c).iter().zip(cache.normalized.plane(n, c)) {
                    sum_dy += dy;
                    sum_dy_xh += dy * xh;
                }
            }
            self.shift.grad[c] += sum_dy;
            self.scale.grad[c] += sum_dy_xh;
            let k = self.scale.value[c] * cache.inv_std[c] / m;
            for n in 0..s.batch {
                let dy = grad_out.plane(n, c);
                let xh = cache.normalized.plane(n, c);
                for ((o, &d), &h) in grad_in.plane_mut(n, c).iter_mut().zip(dy).zip(xh) {
                    *o = k * (m * d - sum_dy - h * sum_dy_xh);
                }
            }
        }
        Ok(grad_in)
    }
}

impl<T> Parameterized<T> for BatchNorm2d<T> {
    fn params(&self) -> Vec<&Param<T>> {
        vec![&self.scale, &self.shift, &self.running_mean, &self.running_var]
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        vec![
            &mut self.scale,
            &mut self.shift,
            &mut self.running_mean,
            &mut self.running_var,
        ]
    }
}

/// Functional form: normalise `input` with `params` in the given mode.
pub fn batch_norm<T: Real>(
    input: &FeatureMap<T>,
    params: &mut BatchNorm2d<T>,
    mode: Mode,
    epsilon: T,
) -> Result<FeatureMap<T>> {
    params.epsilon = epsilon;
    params.forward(input, mode)
}
