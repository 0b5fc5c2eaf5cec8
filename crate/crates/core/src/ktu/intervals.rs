//! Empirical prediction intervals by sampling the predicted Gaussians.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{KtuError, KtuModel};
use crate::linalg::Matrix;
use crate::profiles::HorizonExo;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct Interval<T> {
    pub lower: T,
    pub upper: T,
    /// Predicted mean.
    pub mean: T,
}

impl<T: Scalar> Interval<T> {
    pub fn width(&self) -> T {
        self.upper - self.lower
    }

    pub fn contains(&self, y: T) -> bool {
        self.lower <= y && y <= self.upper
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IntervalForecast<T> {
    pub load: Vec<Interval<T>>,
    pub pv: Vec<Interval<T>>,
}

/// Linear interpolation between order statistics of a sorted sample.
fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn check_args(n_samples: usize, level: f64) -> Result<(), KtuError> {
    if n_samples < 100 {
        return Err(KtuError::InvalidArgument(format!("n_samples must be at least 100, got {n_samples}")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(KtuError::InvalidArgument(format!("level must be in (0, 1), got {level}")));
    }
    Ok(())
}

/// Central `level` interval of `n_samples` draws from `N(mu, var)`.
/// With `clamp_at_zero`, negative draws become 0.
pub fn sample_interval<T: Scalar, R: Rng + ?Sized>(
    mu: T,
    var: T,
    n_samples: usize,
    level: f64,
    clamp_at_zero: bool,
    rng: &mut R,
) -> Result<Interval<T>, KtuError> {
    check_args(n_samples, level)?;
    let (m, s) = (mu.f64(), var.f64().max(0.0).sqrt());
    let mut draws: Vec<f64> = (0..n_samples)
        .map(|_| {
            let z: f64 = StandardNormal.sample(rng);
            let x = m + s * z;
            if clamp_at_zero {
                x.max(0.0)
            } else {
                x
            }
        })
        .collect();
    draws.sort_by(f64::total_cmp);
    let tail = (1.0 - level) / 2.0;
    Ok(Interval { lower: T::of(quantile(&draws, tail)), upper: T::of(quantile(&draws, 1.0 - tail)), mean: mu })
}

/// Intervals for every horizon step of one window. PV draws are clamped at
/// zero and zeroed at night, so night steps give `(0, 0)`.
pub fn predict_with_intervals<T: Scalar, R: Rng + ?Sized>(
    model: &KtuModel<T>,
    input: &Matrix<T>,
    exo: &HorizonExo<T>,
    n_samples: usize,
    level: f64,
    rng: &mut R,
) -> Result<IntervalForecast<T>, KtuError> {
    check_args(n_samples, level)?;
    let f = model.forward(input, exo)?;
    let mut out = IntervalForecast { load: Vec::with_capacity(f.horizon()), pv: Vec::with_capacity(f.horizon()) };
    for k in 0..f.horizon() {
        out.load.push(sample_interval(f.mu_load[k], f.var_load[k], n_samples, level, false, rng)?);
        let pv = sample_interval(f.mu_pv[k], f.var_pv[k], n_samples, level, true, rng)?;
        out.pv.push(if exo.daylight_flag[k] > T::zero() { pv } else { Interval { lower: T::zero(), upper: T::zero(), mean: T::zero() } });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn gaussian_quantiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let iv = sample_interval(10.0_f64, 4.0, 100_000, 0.9, false, &mut rng).unwrap();
        // N(10, 2²) 5% / 95% quantiles are 10 ∓ 1.6449·2
        let z = 1.6448536269514722;
        assert!((iv.lower - (10.0 - 2.0 * z)).abs() < 0.1, "{iv:?}");
        assert!((iv.upper - (10.0 + 2.0 * z)).abs() < 0.1, "{iv:?}");
        assert!((iv.lower - 6.71).abs() < 0.1 && (iv.upper - 13.29).abs() < 0.1);
    }

    #[test]
    fn degenerate_variance() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let iv = sample_interval(3.0_f64, 1e-14, 1000, 0.9, false, &mut rng).unwrap();
        assert!(iv.width() < 1e-5);
        assert!(iv.contains(3.0));
    }

    #[test]
    fn clamping_and_arguments() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let iv = sample_interval(0.0_f64, 1.0, 1000, 0.9, true, &mut rng).unwrap();
        assert_eq!(iv.lower, 0.0);
        assert!(sample_interval(0.0_f64, 1.0, 99, 0.9, false, &mut rng).is_err());
        assert!(sample_interval(0.0_f64, 1.0, 100, 1.0, false, &mut rng).is_err());
    }

    #[test]
    fn quantile_interpolates() {
        assert_eq!(quantile(&[0.0, 1.0, 2.0, 3.0, 4.0], 0.5), 2.0);
        assert_eq!(quantile(&[0.0, 10.0], 0.25), 2.5);
    }
}
