use std::ops::Range;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::EnvError;
use crate::ktu::{ForecastDistribution, KtuModel};
use crate::profiles::{build_windows, encode_profile, EnergyProfile, FeatureEncoder, ProsumerKind};

/// Variance floor for oracle forecasts.
const ORACLE_VAR_FLOOR: f64 = 1e-6;

/// Noise added to the true future: `σ = relative·x + absolute`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleNoise {
    pub relative: f64,
    pub absolute: f64,
}

impl Default for OracleNoise {
    fn default() -> Self {
        Self { relative: 0.10, absolute: 0.05 }
    }
}

/// Forecast issued at each profile hour `t` for hours `t+1..=t+horizon`,
/// precomputed per agent.
#[derive(Debug, Clone, PartialEq)]
pub struct ForecastTable {
    horizon: usize,
    per_agent: Vec<Vec<Option<ForecastDistribution<f64>>>>,
}

impl ForecastTable {
    pub fn new(horizon: usize, per_agent: Vec<Vec<Option<ForecastDistribution<f64>>>>) -> Result<Self, EnvError> {
        for (i, series) in per_agent.iter().enumerate() {
            for (t, f) in series.iter().enumerate() {
                if let Some(f) = f {
                    if f.horizon() != horizon {
                        return Err(EnvError::Forecast(format!("agent {i} hour {t}: horizon {} != {horizon}", f.horizon())));
                    }
                }
            }
        }
        Ok(Self { horizon, per_agent })
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_agents(&self) -> usize {
        self.per_agent.len()
    }

    pub fn get(&self, agent: usize, t: usize) -> Option<&ForecastDistribution<f64>> {
        self.per_agent.get(agent)?.get(t)?.as_ref()
    }

    /// True future plus Gaussian noise. PV that is truly zero stays zero.
    pub fn oracle(profiles: &[EnergyProfile], horizon: usize, noise: OracleNoise, seed: u64) -> Result<Self, EnvError> {
        if horizon == 0 {
            return Err(EnvError::Forecast("horizon must be at least 1".into()));
        }
        if !(noise.relative >= 0.0 && noise.absolute >= 0.0) {
            return Err(EnvError::Forecast("oracle noise must be non-negative".into()));
        }
        let per_agent = profiles
            .iter()
            .enumerate()
            .map(|(i, p)| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                rng.set_stream(i as u64);
                let mut draw = |x: f64| -> (f64, f64) {
                    let sigma = noise.relative * x.abs() + noise.absolute;
                    let z: f64 = StandardNormal.sample(&mut rng);
                    ((x + sigma * z).max(0.0), sigma * sigma + ORACLE_VAR_FLOOR)
                };
                (0..p.len())
                    .map(|t| {
                        if t + horizon >= p.len() {
                            return None;
                        }
                        let mut f = ForecastDistribution::constant(horizon, 0.0, 0.0, 0.0);
                        for k in 0..horizon {
                            let idx = t + 1 + k;
                            (f.mu_load[k], f.var_load[k]) = draw(p.load[idx]);
                            let (mu, var) = draw(p.generation[idx]);
                            let night = p.generation[idx] <= 0.0;
                            f.mu_pv[k] = if night { 0.0 } else { mu };
                            f.var_pv[k] = if night { ORACLE_VAR_FLOOR } else { var };
                        }
                        Some(f)
                    })
                    .collect()
            })
            .collect();
        Self::new(horizon, per_agent)
    }

    /// Runs a trained forecaster over every hour in `range` that has a full
    /// input window behind it.
    pub fn from_ktu(
        model: &KtuModel<f64>,
        encoder: &FeatureEncoder,
        profiles: &[EnergyProfile],
        kinds: &[ProsumerKind],
        range: Range<usize>,
    ) -> Result<Self, EnvError> {
        if kinds.len() != profiles.len() {
            return Err(EnvError::Misaligned(format!("{} kinds for {} profiles", kinds.len(), profiles.len())));
        }
        if encoder.dim() != model.feature_dim() {
            return Err(EnvError::Forecast(format!("encoder emits {} features, model expects {}", encoder.dim(), model.feature_dim())));
        }
        let (window, horizon) = (model.config().window, model.config().horizon);
        let mut per_agent = Vec::with_capacity(profiles.len());
        for (p, &kind) in profiles.iter().zip(kinds) {
            let features = encode_profile(encoder, p, kind)?;
            let windows = build_windows(p, &features, window, horizon)?;
            let wanted: Vec<_> = windows.samples.iter().filter(|s| range.contains(&(s.origin - 1))).collect();
            let mut series = vec![None; p.len()];
            for chunk in wanted.chunks(256) {
                let batch: Vec<_> = chunk.iter().map(|s| (&s.input, &s.exo)).collect();
                for (s, f) in chunk.iter().zip(model.forward_batch(&batch)?) {
                    series[s.origin - 1] = Some(f);
                }
            }
            per_agent.push(series);
        }
        Self::new(horizon, per_agent)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use chrono::NaiveDate;

    fn profile() -> EnergyProfile {
        EnergyProfile {
            prosumer_id: "a".into(),
            start: NaiveDate::from_ymd_opt(2023, 6, 1).unwrap().and_hms_opt(0, 0, 0).unwrap(),
            load: (0..48).map(|t| 1.0 + t as f64 * 0.1).collect(),
            generation: (0..48).map(|t| if (6..18).contains(&(t % 24)) { 2.0 } else { 0.0 }).collect(),
        }
    }

    #[test]
    fn noiseless_oracle_is_truth() {
        let p = profile();
        let table = ForecastTable::oracle(std::slice::from_ref(&p), 3, OracleNoise { relative: 0.0, absolute: 0.0 }, 1).unwrap();
        let f = table.get(0, 10).unwrap();
        assert_eq!(f.mu_load, p.load[11..14].to_vec());
        assert_eq!(f.mu_pv, p.generation[11..14].to_vec());
        assert!(table.get(0, 45).is_none());
        assert!(table.get(0, 44).is_some());
    }

    #[test]
    fn oracle_is_seeded_and_keeps_night_dark() {
        let p = profile();
        let a = ForecastTable::oracle(std::slice::from_ref(&p), 3, OracleNoise::default(), 7).unwrap();
        let b = ForecastTable::oracle(std::slice::from_ref(&p), 3, OracleNoise::default(), 7).unwrap();
        assert_eq!(a, b);
        let f = a.get(0, 20).unwrap();
        assert_eq!(f.mu_pv, vec![0.0; 3]);
        assert!(f.var_load.iter().all(|&v| v > 0.0));
    }
}
