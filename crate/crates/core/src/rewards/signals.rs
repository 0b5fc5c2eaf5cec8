use super::{TariffCalendar, TariffPeriod};
use crate::ktu::ForecastDistribution;
use crate::Scalar;

pub const CONFIDENCE_EPS: f64 = 1e-6;

/// `α = 1 / (1 + σ / (|μ| + ε))`, in `[0, 1]`. Negative variances are
/// treated as zero.
pub fn confidence_score<T: Scalar>(mu: T, sigma2: T) -> T {
    let sigma = sigma2.max(T::zero()).sqrt();
    let alpha = T::one() / (T::one() + sigma / (mu.abs() + T::of(CONFIDENCE_EPS)));
    if alpha.is_nan() {
        T::zero()
    } else {
        alpha
    }
}

/// Mean confidence over both targets and every horizon step.
pub fn forecast_confidence<T: Scalar>(forecast: &ForecastDistribution<T>) -> T {
    let scores: Vec<T> = forecast
        .mu_load
        .iter()
        .zip(&forecast.var_load)
        .chain(forecast.mu_pv.iter().zip(&forecast.var_pv))
        .map(|(&m, &v)| confidence_score(m, v))
        .collect();
    if scores.is_empty() {
        return T::zero();
    }
    scores.iter().copied().sum::<T>() / T::of(scores.len() as f64)
}

/// `Σ (μL − μP)` over horizon steps `k = 1..=H` whose hour
/// `(current_hour + k) mod 24` is a peak hour.
pub fn peak_deficit<T: Scalar>(forecast: &ForecastDistribution<T>, current_hour: u32, calendar: &TariffCalendar) -> T {
    forecast
        .mu_load
        .iter()
        .zip(&forecast.mu_pv)
        .enumerate()
        .filter(|(k, _)| calendar.period(current_hour + *k as u32 + 1) == TariffPeriod::P)
        .map(|(_, (&l, &p))| l - p)
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fc(load: [f64; 3], pv: [f64; 3]) -> ForecastDistribution<f64> {
        ForecastDistribution { mu_load: load.to_vec(), var_load: vec![1.0; 3], mu_pv: pv.to_vec(), var_pv: vec![1.0; 3] }
    }

    #[test]
    fn confidence_examples() {
        assert_eq!(confidence_score(3.0, 0.0), 1.0);
        assert!((confidence_score(2.0_f64, 4.0) - 1.0 / (1.0 + 2.0 / (2.0 + 1e-6))).abs() < 1e-15);
        assert!((confidence_score(2.0_f64, 4.0) - 0.5).abs() < 1e-6);
        assert!(confidence_score(0.0_f64, 1e6) < 1e-8);
        assert_eq!(confidence_score(f64::NAN, 1.0), 0.0);
    }

    #[test]
    fn mean_confidence_over_targets_and_steps() {
        let f = ForecastDistribution { mu_load: vec![1.0, 1.0], var_load: vec![0.0, 0.0], mu_pv: vec![1.0, 1.0], var_pv: vec![1.0, 1.0] };
        let pv: f64 = 1.0 / (1.0 + 1.0 / (1.0 + 1e-6));
        let expected = (1.0 + 1.0 + pv + pv) / 4.0;
        assert!((forecast_confidence(&f) - expected).abs() < 1e-12);
    }

    #[test]
    fn peak_deficit_examples() {
        let cal = TariffCalendar::default();
        // hours 9, 10, 11: no peak step
        assert_eq!(peak_deficit(&fc([5.0; 3], [0.0; 3]), 8, &cal), 0.0);
        // hours 15, 16, 17: only the last step is peak
        assert_eq!(peak_deficit(&fc([1.0, 1.0, 5.0], [0.0, 0.0, 2.0]), 14, &cal), 3.0);
        assert_eq!(peak_deficit(&fc([1.0, 1.0, 1.0], [0.0, 0.0, 4.0]), 14, &cal), -3.0);
        // hours 22, 23, 0 wrap past midnight
        assert_eq!(peak_deficit(&fc([1.0; 3], [0.0; 3]), 21, &cal), 0.0);
        assert_eq!(peak_deficit(&fc([1.0; 3], [0.0; 3]), 16, &cal), 3.0);
    }
}
