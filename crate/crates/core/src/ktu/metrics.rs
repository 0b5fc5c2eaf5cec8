//! Interval coverage, width and Gaussian CRPS.

use statrs::function::erf::erf;

use super::{Interval, KtuError};
use crate::Scalar;

/// Fraction of targets inside their intervals.
pub fn picp<T: Scalar>(intervals: &[Interval<T>], targets: &[T]) -> Result<T, KtuError> {
    if intervals.len() != targets.len() {
        return Err(KtuError::Dimension(format!("{} intervals for {} targets", intervals.len(), targets.len())));
    }
    if intervals.is_empty() {
        return Err(KtuError::EmptyDataset("coverage targets"));
    }
    let hits = intervals.iter().zip(targets).filter(|(iv, &y)| iv.contains(y)).count();
    Ok(T::of(hits as f64 / targets.len() as f64))
}

/// Mean interval width.
pub fn mpiw<T: Scalar>(intervals: &[Interval<T>]) -> Result<T, KtuError> {
    if intervals.is_empty() {
        return Err(KtuError::EmptyDataset("intervals"));
    }
    Ok(intervals.iter().map(Interval::width).sum::<T>() / T::of(intervals.len() as f64))
}

/// Closed-form CRPS of `N(mu, sigma²)` at `y`:
/// `σ [z (2Φ(z) − 1) + 2φ(z) − 1/√π]`, `z = (y − μ)/σ`.
pub fn crps_gaussian<T: Scalar>(mu: T, sigma: T, y: T) -> Result<T, KtuError> {
    if !(sigma > T::zero()) {
        return Err(KtuError::InvalidArgument(format!("sigma must be positive, got {sigma}")));
    }
    let (m, s) = (mu.f64(), sigma.f64());
    let z = (y.f64() - m) / s;
    let cdf = 0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2));
    let pdf = (-0.5 * z * z).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
    Ok(T::of(s * (z * (2.0 * cdf - 1.0) + 2.0 * pdf - inv_sqrt_pi)))
}
