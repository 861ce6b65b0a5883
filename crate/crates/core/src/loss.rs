//! Per-task cross-entropy, Dynamic Weight Average and the weighted total loss.

use crate::error::{config_err, shape_err, Error, Result};
use crate::nn::{FeatureMap, Real};

/// Lower clamp applied to probabilities before taking the logarithm.
pub const LOG_CLAMP: f64 = 1e-12;
pub const DEFAULT_TEMPERATURE: f64 = 2.0;

fn check_pair<T: Real>(scores: &FeatureMap<T>, target: &FeatureMap<T>) -> Result<()> {
    if scores.shape() != target.shape() {
        return Err(shape_err!(
            "cross-entropy scores {} vs target {}",
            scores.shape(),
            target.shape()
        ));
    }
    Ok(())
}

fn pixel_count<T: Real>(scores: &FeatureMap<T>) -> T {
    let s = scores.shape();
    T::lit((s.batch * s.plane()) as f64)
}

/// `-(1/P) sum y log max(p, 1e-12)` where `P` is the number of pixels in the
/// batch. Natural logarithm.
pub fn cross_entropy<T: Real>(scores: &FeatureMap<T>, target: &FeatureMap<T>) -> Result<T> {
    check_pair(scores, target)?;
    let clamp = T::lit(LOG_CLAMP);
    let mut total = T::zero();
    for (&p, &y) in scores.data().iter().zip(target.data()) {
        if y != T::zero() {
            total -= y * p.max(clamp).ln();
        }
    }
    Ok(total / pixel_count(scores))
}

/// Gradient of [`cross_entropy`] with respect to the probabilities. Zero where
/// the clamp is active.
pub fn cross_entropy_grad<T: Real>(scores: &FeatureMap<T>, target: &FeatureMap<T>) -> Result<FeatureMap<T>> {
    check_pair(scores, target)?;
    let clamp = T::lit(LOG_CLAMP);
    let inv = T::one() / pixel_count(scores);
    let mut g = FeatureMap::zeros(scores.shape());
    for ((o, &p), &y) in g.data_mut().iter_mut().zip(scores.data()).zip(target.data()) {
        if y != T::zero() && p > clamp {
            *o = -y * inv / p;
        }
    }
    Ok(g)
}

/// `2 * softmax(ratios / temperature)`.
pub fn dwa_weights(ratios: [f64; 2], temperature: f64) -> [f64; 2] {
    let a = ratios[0] / temperature;
    let b = ratios[1] / temperature;
    let hi = a.max(b);
    let ea = (a - hi).exp();
    let eb = (b - hi).exp();
    let total = ea + eb;
    let we = 2.0 * ea / total;
    // Derive the second weight from the first so the pair sums to 2 exactly.
    [we, 2.0 - we]
}

/// Epoch-level Dynamic Weight Average state for the element/defect pair.
#[derive(Clone, Debug, PartialEq)]
pub struct DwaState {
    epoch: usize,
    history: Vec<[f64; 2]>,
    temperature: f64,
    weights: [f64; 2],
}

impl Default for DwaState {
    fn default() -> Self {
        Self::new(DEFAULT_TEMPERATURE)
    }
}

impl DwaState {
    pub fn new(temperature: f64) -> Self {
        DwaState {
            epoch: 1,
            history: Vec::new(),
            temperature,
            weights: [1.0, 1.0],
        }
    }

    /// 1-based index of the epoch the current weights apply to.
    pub fn epoch(&self) -> usize {
        self.epoch
    }

    pub fn temperature(&self) -> f64 {
        self.temperature
    }

    /// `[lambda_e, lambda_d]` for the current epoch.
    pub fn weights(&self) -> [f64; 2] {
        self.weights
    }

    /// Recorded per-task mean training losses, oldest first.
    pub fn history(&self) -> &[[f64; 2]] {
        &self.history
    }

    /// Records the finished epoch's losses and advances to the next epoch.
    pub fn update(&mut self, epoch_losses: [f64; 2]) -> Result<()> {
        if epoch_losses.iter().any(|l| !(l.is_finite() && *l > 0.0)) {
            return Err(Error::Numeric(format!(
                "DWA needs positive finite losses, got {epoch_losses:?}"
            )));
        }
        if !(self.temperature.is_finite() && self.temperature > 0.0) {
            return Err(config_err!("DWA temperature must be positive"));
        }
        self.history.push(epoch_losses);
        self.epoch += 1;
        let n = self.history.len();
        self.weights = if n >= 2 {
            let (prev, older) = (self.history[n - 1], self.history[n - 2]);
            dwa_weights([prev[0] / older[0], prev[1] / older[1]], self.temperature)
        } else {
            [1.0, 1.0]
        };
        Ok(())
    }
}

/// Functional form of [`DwaState::update`].
pub fn dwa_update(state: &DwaState, epoch_losses: [f64; 2]) -> Result<DwaState> {
    let mut next = state.clone();
    next.update(epoch_losses)?;
    Ok(next)
}

/// `lambda_e * L_e + lambda_d * L_d`.
pub fn total_loss(loss_element: f64, loss_defect: f64, state: &DwaState) -> f64 {
    weighted_total(loss_element, loss_defect, state.weights())
}

pub fn weighted_total(loss_element: f64, loss_defect: f64, weights: [f64; 2]) -> f64 {
    weights[0] * loss_element + weights[1] * loss_defect
}

/// One row of the exported loss history.
#[derive(Clone, Debug, PartialEq)]
pub struct LossRecord {
    pub epoch: usize,
    pub loss_element: f64,
    pub loss_defect: f64,
    pub lambda_element: f64,
    pub lambda_defect: f64,
    pub loss_total: f64,
}

pub const LOSS_HEADER: &str = "epoch,loss_element,loss_defect,lambda_element,lambda_defect,loss_total";

pub fn render_loss_history(records: &[LossRecord]) -> String {
    let mut out = String::from(LOSS_HEADER);
    out.push('\n');
    for r in records {
        out.push_str(&format!(
            "{},{:e},{:e},{:e},{:e},{:e}\n",
            r.epoch, r.loss_element, r.loss_defect, r.lambda_element, r.lambda_defect, r.loss_total
        ));
    }
    out
}

pub fn parse_loss_history(text: &str) -> Result<Vec<LossRecord>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some(LOSS_HEADER) {
        return Err(config_err!("loss history must start with `{LOSS_HEADER}`"));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .enumerate()
        .map(|(i, line)| {
            let f: Vec<&str> = line.split(',').collect();
            if f.len() != 6 {
                return Err(config_err!("loss history row {}: expected 6 fields", i + 1));
            }
            let num = |s: &str| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|e| config_err!("loss history row {}: `{s}`: {e}", i + 1))
            };
            Ok(LossRecord {
                epoch: f[0]
                    .trim()
                    .parse()
                    .map_err(|e| config_err!("loss history row {}: epoch: {e}", i + 1))?,
                loss_element: num(f[1])?,
                loss_defect: num(f[2])?,
                lambda_element: num(f[3])?,
                lambda_defect: num(f[4])?,
                loss_total: num(f[5])?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Shape;

    fn fm(c: usize, h: usize, w: usize, v: Vec<f64>) -> FeatureMap<f64> {
        FeatureMap::from_vec(Shape::new(1, c, h, w), v).unwrap()
    }

    #[test]
    fn confident_correct_is_zero() {
        let p = fm(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]);
        assert_eq!(cross_entropy(&p, &p).unwrap(), 0.0);
    }

    #[test]
    fn uniform_two_class_is_ln2() {
        let p = fm(2, 1, 1, vec![0.5, 0.5]);
        for y in [vec![1.0, 0.0], vec![0.0, 1.0]] {
            let l = cross_entropy(&p, &fm(2, 1, 1, y)).unwrap();
            assert!((l - std::f64::consts::LN_2).abs() < 1e-12);
            assert!((l - std::f64::consts::LN_2).abs() < 1e-6);
        }
    }

    #[test]
    fn confident_wrong_is_clamped() {
        let p = fm(2, 1, 1, vec![0.0, 1.0]);
        let y = fm(2, 1, 1, vec![1.0, 0.0]);
        let l = cross_entropy(&p, &y).unwrap();
        assert!((l - (-(1e-12f64).ln())).abs() < 1e-9);
        assert_eq!(cross_entropy_grad(&p, &y).unwrap().data(), &[0.0, 0.0]);
    }

    #[test]
    fn shape_mismatch() {
        let p = fm(2, 1, 1, vec![0.5, 0.5]);
        let y = fm(2, 1, 2, vec![1.0, 0.0, 0.0, 1.0]);
        assert!(cross_entropy(&p, &y).is_err());
    }

    #[test]
    fn first_two_epochs_use_unit_weights() {
        let mut s = DwaState::default();
        assert_eq!(s.epoch(), 1);
        assert_eq!(s.weights(), [1.0, 1.0]);
        s.update([0.9, 0.4]).unwrap();
        assert_eq!(s.epoch(), 2);
        assert_eq!(s.weights(), [1.0, 1.0]);
        s.update([0.5, 0.39]).unwrap();
        assert_eq!(s.epoch(), 3);
        assert_ne!(s.weights(), [1.0, 1.0]);
    }

    #[test]
    fn non_positive_loss_rejected() {
        let mut s = DwaState::default();
        assert!(s.update([0.0, 1.0]).is_err());
        assert!(s.update([1.0, -1.0]).is_err());
        assert!(s.update([f64::NAN, 1.0]).is_err());
        assert_eq!(s.epoch(), 1);
    }

    #[test]
    fn total_loss_examples() {
        let s = DwaState::default();
        assert!((total_loss(0.3, 0.7, &s) - 1.0).abs() < 1e-15);
        assert_eq!(weighted_total(0.4, 0.9, [2.0, 0.0]), 0.8);
        assert!((weighted_total(0.4, 0.6, [1.05, 0.95]) - 0.99).abs() < 1e-12);
    }

    #[test]
    fn history_text_round_trip() {
        let rows = vec![LossRecord {
            epoch: 1,
            loss_element: 1.25,
            loss_defect: 0.5,
            lambda_element: 1.0,
            lambda_defect: 1.0,
            loss_total: 1.75,
        }];
        assert_eq!(parse_loss_history(&render_loss_history(&rows)).unwrap(), rows);
        assert!(parse_loss_history("nope\n").is_err());
    }
}
