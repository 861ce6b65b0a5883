//! Central-difference verification of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::nn::Param;

#[derive(Clone, Debug)]
pub struct GradCheckConfig {
    /// Central-difference step `h`.
    pub step: f64,
    /// Pass threshold on the maximum relative error.
    pub tolerance: f64,
    /// Coordinates probed per parameter array; arrays at most this long are
    /// checked exhaustively.
    pub samples_per_param: usize,
    pub seed: u64,
    /// Lower bound on the relative-error denominator, so coordinates whose true
    /// gradient is ~0 are judged on absolute error instead.
    pub abs_floor: f64,
}

impl Default for GradCheckConfig {
    fn default() -> Self {
        GradCheckConfig {
            step: 1e-5,
            tolerance: 1e-4,
            samples_per_param: 16,
            seed: 0,
            abs_floor: 1e-6,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GradCheckReport {
    pub param: String,
    pub checked: usize,
    pub max_abs_error: f64,
    pub max_rel_error: f64,
    /// Sampled coordinates left out because the two perturbed evaluations
    /// disagreed on the activation pattern (a kink lies between them).
    pub skipped: usize,
    pub passed: bool,
}

impl std::fmt::Display for GradCheckReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "{:<40} n={:<4} skip={:<3} abs={:.3e} rel={:.3e} {}",
            self.param,
            self.checked,
            self.skipped,
            self.max_abs_error,
            self.max_rel_error,
            if self.passed { "ok" } else { "FAIL" }
        )
    }
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    let denom = analytic.abs().max(numeric.abs()).max(floor);
    (analytic - numeric).abs() / denom
}

/// Compares `params[i].grad` against central differences of `loss_fn`.
///
/// `loss_fn` must be a deterministic function of the parameter values. Every
/// trainable array yields one report; non-trainable arrays are skipped.
pub fn finite_difference_check<F>(
    mut loss_fn: F,
    params: &mut [Param<f64>],
    config: &GradCheckConfig,
) -> Result<Vec<GradCheckReport>>
where
    F: FnMut(&[Param<f64>]) -> f64,
{
    finite_difference_check_kinked(|p| (loss_fn(p), Vec::new()), params, config)
}

/// Like [`finite_difference_check`] for piecewise-smooth losses.
///
/// `loss_fn` also returns the on/off state of every kinked unit (ReLU and
/// the like). A coordinate whose `+h` and `-h` evaluations report different
/// states straddles a kink, where the central difference does not estimate
/// the derivative; it is counted in `skipped` instead of being compared.
pub fn finite_difference_check_kinked<F>(
    mut loss_fn: F,
    params: &mut [Param<f64>],
    config: &GradCheckConfig,
) -> Result<Vec<GradCheckReport>>
where
    F: FnMut(&[Param<f64>]) -> (f64, Vec<bool>),
{
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let h = config.step;
    let mut reports = Vec::new();
    for pi in 0..params.len() {
        if !params[pi].trainable {
            continue;
        }
        let len = params[pi].len();
        let coords: Vec<usize> = if len <= config.samples_per_param {
            (0..len).collect()
        } else {
            let mut c = sample(&mut rng, len, config.samples_per_param).into_vec();
            c.sort_unstable();
            c
        };
        let mut max_abs: f64 = 0.0;
        let mut max_rel: f64 = 0.0;
        let mut skipped = 0;
        for &i in &coords {
            let original = params[pi].value[i];
            params[pi].value[i] = original + h;
            let (plus, plus_state) = loss_fn(params);
            params[pi].value[i] = original - h;
            let (minus, minus_state) = loss_fn(params);
            params[pi].value[i] = original;
            if !plus.is_finite() || !minus.is_finite() {
                return Err(Error::Numeric(format!(
                    "non-finite loss while perturbing {}[{i}]",
                    params[pi].name
                )));
            }
            if plus_state != minus_state {
                skipped += 1;
                continue;
            }
            let numeric = (plus - minus) / (2.0 * h);
            let analytic = params[pi].grad[i];
            max_abs = max_abs.max((analytic - numeric).abs());
            max_rel = max_rel.max(relative_error(analytic, numeric, config.abs_floor));
        }
        reports.push(GradCheckReport {
            param: params[pi].name.clone(),
            checked: coords.len() - skipped,
            max_abs_error: max_abs,
            max_rel_error: max_rel,
            skipped,
            passed: max_rel <= config.tolerance,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quadratic(params: &[Param<f64>]) -> f64 {
        params
            .iter()
            .flat_map(|p| p.value.iter())
            .map(|v| 0.5 * v * v)
            .sum()
    }

    fn quadratic_params() -> Vec<Param<f64>> {
        let mut p = Param::new("theta", &[7], 0.0, true);
        for (i, v) in p.value.iter_mut().enumerate() {
            *v = (i as f64 - 3.0) * 0.7;
        }
        p.grad = p.value.clone();
        vec![p]
    }

    #[test]
    fn quadratic_gradient_is_exact() {
        let mut params = quadratic_params();
        let reports = finite_difference_check(quadratic, &mut params, &GradCheckConfig::default()).unwrap();
        assert_eq!(reports.len(), 1);
        assert!(reports[0].passed);
        assert!(reports[0].max_rel_error < 1e-9, "{}", reports[0]);
    }

    #[test]
    fn doubled_gradient_fails() {
        let mut params = quadratic_params();
        params[0].grad.iter_mut().for_each(|g| *g *= 2.0);
        let reports = finite_difference_check(quadratic, &mut params, &GradCheckConfig::default()).unwrap();
        assert!(!reports[0].passed);
    }

    #[test]
    fn non_finite_loss_names_the_parameter() {
        let mut params = quadratic_params();
        let err = finite_difference_check(|_| f64::NAN, &mut params, &GradCheckConfig::default()).unwrap_err();
        assert!(err.to_string().contains("theta"));
    }

    #[test]
    fn kink_crossings_are_skipped() {
        // |x| at x = 0.5e-5 with h = 1e-5 straddles the kink at 0.
        let mut p = Param::new("x", &[2], 0.0, true);
        p.value = vec![0.5e-5, 1.0];
        p.grad = vec![-1.0, 1.0];
        let abs = |ps: &[Param<f64>]| {
            let v = &ps[0].value;
            (v[0].abs() + v[1].abs(), v.iter().map(|x| *x > 0.0).collect())
        };
        let mut params = vec![p];
        let reports = finite_difference_check_kinked(abs, &mut params, &GradCheckConfig::default()).unwrap();
        assert_eq!((reports[0].checked, reports[0].skipped), (1, 1));
        assert!(reports[0].passed);
    }

    #[test]
    fn values_restored_after_check() {
        let mut params = quadratic_params();
        let before = params[0].value.clone();
        finite_difference_check(quadratic, &mut params, &GradCheckConfig::default()).unwrap();
        assert_eq!(params[0].value, before);
    }
}
