use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::ktu::ForecastDistribution;
use crate::rewards::AgentObservation;
use crate::Scalar;

/// How forecasts enter the state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateMode {
    /// `[L, G, B, FL, FG, U_L, U_G]` with horizon means.
    #[default]
    Summary,
    /// `[L, G, B]` followed by every step of `μL, μP, σL, σP`.
    Flattened,
    /// Summary layout with the forecast components zeroed.
    ForecastFree,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateSpec {
    pub mode: StateMode,
    pub horizon: usize,
    /// Energy components are divided by this (kWh).
    pub energy_scale: f64,
}

impl StateSpec {
    pub fn new(mode: StateMode, horizon: usize, energy_scale: f64) -> Self {
        Self { mode, horizon, energy_scale }
    }

    pub fn dim(&self) -> usize {
        match self.mode {
            StateMode::Summary | StateMode::ForecastFree => 7,
            StateMode::Flattened => 3 + 4 * self.horizon,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct StateVector<T> {
    pub values: Vec<T>,
}

impl<T: Scalar> StateVector<T> {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn mean<T: Scalar>(xs: &[T]) -> T {
    if xs.is_empty() {
        T::zero()
    } else {
        xs.iter().copied().sum::<T>() / T::of(xs.len() as f64)
    }
}

/// Assembles the normalised state. `B` is the SoC fraction; the forecast
/// summaries are horizon means of `μ` and of `σ`. The forecast is required
/// unless the mode is forecast-free.
pub fn build_state<T: Scalar>(
    obs: &AgentObservation<T>,
    forecast: Option<&ForecastDistribution<T>>,
    spec: &StateSpec,
) -> Result<StateVector<T>, AgentError> {
    let k = T::one() / T::of(spec.energy_scale.max(1e-9));
    let mut values = vec![obs.load * k, obs.generation * k, obs.soc_pct / T::of(100.0)];
    match spec.mode {
        StateMode::ForecastFree => values.extend([T::zero(); 4]),
        StateMode::Summary => {
            let f = forecast.ok_or(AgentError::MissingForecast)?;
            values.extend([
                mean(&f.mu_load) * k,
                mean(&f.mu_pv) * k,
                mean(&f.sigma_load()) * k,
                mean(&f.sigma_pv()) * k,
            ]);
        }
        StateMode::Flattened => {
            let f = forecast.ok_or(AgentError::MissingForecast)?;
            if f.horizon() != spec.horizon {
                return Err(AgentError::StateDimension { expected: spec.dim(), found: 3 + 4 * f.horizon() });
            }
            for series in [f.mu_load.clone(), f.mu_pv.clone(), f.sigma_load(), f.sigma_pv()] {
                values.extend(series.into_iter().map(|x| x * k));
            }
        }
    }
    if values.iter().any(|x| !x.is_finite()) {
        return Err(AgentError::InvalidConfig { field: "state", reason: "non-finite state component".into() });
    }
    Ok(StateVector { values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rewards::TariffPeriod;

    fn obs(load: f64, generation: f64, soc: f64) -> AgentObservation<f64> {
        AgentObservation { load, generation, soc_pct: soc, tariff: TariffPeriod::D, confidence: 1.0, peak_deficit: 0.0 }
    }

    #[test]
    fn zero_case_keeps_only_uncertainty() {
        let f = ForecastDistribution::constant(3, 0.0, 0.0, 0.25);
        let s = build_state(&obs(0.0, 0.0, 0.0), Some(&f), &StateSpec::new(StateMode::Summary, 3, 1.0)).unwrap();
        assert_eq!(s.values, vec![0.0, 0.0, 0.0, 0.0, 0.0, 0.5, 0.5]);
    }

    #[test]
    fn soc_and_uncertainty_summary() {
        let f = ForecastDistribution { mu_load: vec![1.0, 2.0, 3.0], var_load: vec![1.0, 4.0, 9.0], mu_pv: vec![0.0; 3], var_pv: vec![1.0; 3] };
        let s = build_state(&obs(2.0, 1.0, 50.0), Some(&f), &StateSpec::new(StateMode::Summary, 3, 1.0)).unwrap();
        assert_eq!(s.values[2], 0.5);
        assert_eq!(s.values[3], 2.0);
        assert_eq!(s.values[5], 2.0);
        let scaled = build_state(&obs(2.0, 1.0, 50.0), Some(&f), &StateSpec::new(StateMode::Summary, 3, 4.0)).unwrap();
        assert_eq!(scaled.values[5], 0.5);
        assert_eq!(scaled.values[2], 0.5);
    }

    #[test]
    fn forecast_modes() {
        let f = ForecastDistribution::constant(3, 1.0, 1.0, 1.0);
        let free = build_state(&obs(1.0, 1.0, 10.0), None, &StateSpec::new(StateMode::ForecastFree, 3, 1.0)).unwrap();
        assert_eq!(&free.values[3..], &[0.0; 4]);
        let flat = build_state(&obs(1.0, 1.0, 10.0), Some(&f), &StateSpec::new(StateMode::Flattened, 3, 1.0)).unwrap();
        assert_eq!(flat.len(), 15);
        assert!(matches!(
            build_state(&obs(1.0, 1.0, 10.0), None, &StateSpec::new(StateMode::Summary, 3, 1.0)),
            Err(AgentError::MissingForecast)
        ));
    }
}
