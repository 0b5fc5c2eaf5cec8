//! Prosumer load and PV series: synthetic generation, CSV ingestion, feature
//! encoding and supervised sliding windows.

mod csv_io;
mod daylight;
mod features;
mod synth;
mod windows;

use chrono::{Duration, NaiveDateTime};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use csv_io::{load_profiles_csv, read_profiles_csv, write_profiles_csv};
pub use daylight::{compute_daylight, declination_deg, Daylight, DaylightTable, HELSINKI_LATITUDE, MAX_ABS_LATITUDE};
pub use features::{encode_profile, FeatureEncoder, FeatureSeries, FeatureVector, LagContext, NormStats, Season};
pub use synth::{generate_synthetic_profiles, SyntheticConfig, HOURS_PER_YEAR};
pub use windows::{build_windows, DatasetSplits, HorizonExo, Sample, WindowedDataset};

/// Share of annual load that PV is sized to produce.
pub const PV_LOAD_FRACTION: f64 = 0.40;

/// Annual PV yield per installed kWp at Finnish latitudes.
pub const DEFAULT_YIELD_KWH_PER_KWP: f64 = 900.0;

#[derive(Debug, Error)]
pub enum ProfileError {
    #[error("prosumer {id}: {reason}")]
    InvalidSpec { id: String, reason: String },
    #[error("latitude {0} is inside a polar region (|lat| must be < 66.5)")]
    PolarLatitude(f64),
    #[error("day of year {0} outside 1..=366")]
    InvalidDayOfYear(u32),
    #[error("annual load must be positive, got {0}")]
    NonPositiveLoad(f64),
    #[error("insufficient history: need {needed} lagged values, have {available}")]
    InsufficientHistory { needed: usize, available: usize },
    #[error("series of length {len} too short for window {window} + horizon {horizon}")]
    SeriesTooShort { len: usize, window: usize, horizon: usize },
    #[error("window and horizon must both be at least 1")]
    EmptyWindow,
    #[error("row {row}: {reason}")]
    Row { row: u64, reason: String },
    #[error("profiles are not aligned: {0}")]
    Misaligned(String),
    #[error("no profiles")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProsumerKind {
    DairyFarm,
    Household,
    HouseholdWithEv,
}

impl ProsumerKind {
    /// Ordinal size encoding in `[0, 1]`.
    pub fn size_category(self) -> f64 {
        match self {
            ProsumerKind::Household => 0.0,
            ProsumerKind::HouseholdWithEv => 0.5,
            ProsumerKind::DairyFarm => 1.0,
        }
    }

    /// Default battery `(capacity kWh, power kW)`.
    pub fn default_battery(self) -> (f64, f64) {
        match self {
            ProsumerKind::DairyFarm => (30.0, 10.0),
            ProsumerKind::Household | ProsumerKind::HouseholdWithEv => (10.0, 5.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProsumerSpec {
    pub id: String,
    pub kind: ProsumerKind,
    /// kWh per year.
    pub annual_load: f64,
    /// kWp.
    pub pv_capacity: f64,
    /// kWh.
    pub battery_capacity: f64,
}

impl ProsumerSpec {
    /// Spec with PV sized to 40% of annual load and the kind's default battery.
    pub fn sized(id: impl Into<String>, kind: ProsumerKind, annual_load: f64, yield_kwh_per_kwp: f64) -> Result<Self, ProfileError> {
        let pv_capacity = size_pv_capacity(annual_load, yield_kwh_per_kwp)?;
        Ok(Self { id: id.into(), kind, annual_load, pv_capacity, battery_capacity: kind.default_battery().0 })
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let bad = |reason: &str| Err(ProfileError::InvalidSpec { id: self.id.clone(), reason: reason.into() });
        if !(self.annual_load > 0.0) || !self.annual_load.is_finite() {
            return bad("annual_load must be positive");
        }
        if !(self.pv_capacity >= 0.0) || !self.pv_capacity.is_finite() {
            return bad("pv_capacity must be non-negative");
        }
        if !(self.battery_capacity >= 0.0) || !self.battery_capacity.is_finite() {
            return bad("battery_capacity must be non-negative");
        }
        Ok(())
    }
}

/// Annual PV energy target: 40% of annual load.
pub fn pv_energy_target(annual_load: f64) -> Result<f64, ProfileError> {
    if !(annual_load > 0.0) || !annual_load.is_finite() {
        return Err(ProfileError::NonPositiveLoad(annual_load));
    }
    Ok(PV_LOAD_FRACTION * annual_load)
}

/// PV capacity in kWp that yields [`pv_energy_target`] per year.
pub fn size_pv_capacity(annual_load: f64, yield_kwh_per_kwp: f64) -> Result<f64, ProfileError> {
    let target = pv_energy_target(annual_load)?;
    if !(yield_kwh_per_kwp > 0.0) {
        return Err(ProfileError::InvalidSpec { id: String::new(), reason: "yield must be positive".into() });
    }
    Ok(target / yield_kwh_per_kwp)
}

/// Four dairy farms, four households and two households with EVs.
pub fn default_community(yield_kwh_per_kwp: f64) -> Vec<ProsumerSpec> {
    let mut specs = Vec::with_capacity(10);
    let farm_loads = [62_000.0, 48_000.0, 75_000.0, 55_000.0];
    for (i, load) in farm_loads.into_iter().enumerate() {
        specs.push(ProsumerSpec::sized(format!("farm-{}", i + 1), ProsumerKind::DairyFarm, load, yield_kwh_per_kwp).unwrap());
    }
    let house_loads = [9_000.0, 12_500.0, 7_500.0, 15_000.0];
    for (i, load) in house_loads.into_iter().enumerate() {
        specs.push(ProsumerSpec::sized(format!("house-{}", i + 1), ProsumerKind::Household, load, yield_kwh_per_kwp).unwrap());
    }
    for (i, load) in [14_000.0, 17_500.0].into_iter().enumerate() {
        specs.push(ProsumerSpec::sized(format!("ev-house-{}", i + 1), ProsumerKind::HouseholdWithEv, load, yield_kwh_per_kwp).unwrap());
    }
    specs
}

/// Hourly load and generation for one prosumer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnergyProfile {
    pub prosumer_id: String,
    /// Timestamp of index 0; index `t` is `start + t` hours.
    pub start: NaiveDateTime,
    /// kWh per hour.
    pub load: Vec<f64>,
    /// kWh per hour.
    pub generation: Vec<f64>,
}

impl EnergyProfile {
    pub fn len(&self) -> usize {
        self.load.len()
    }

    pub fn is_empty(&self) -> bool {
        self.load.is_empty()
    }

    pub fn timestamp(&self, t: usize) -> NaiveDateTime {
        self.start + Duration::hours(t as i64)
    }

    pub fn total_load(&self) -> f64 {
        self.load.iter().sum()
    }

    pub fn total_generation(&self) -> f64 {
        self.generation.iter().sum()
    }

    /// Length and sign invariants.
    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.load.len() != self.generation.len() {
            return Err(ProfileError::Misaligned(format!(
                "{}: load has {} values, generation {}",
                self.prosumer_id,
                self.load.len(),
                self.generation.len()
            )));
        }
        for (t, (&l, &g)) in self.load.iter().zip(&self.generation).enumerate() {
            if !(l >= 0.0 && l.is_finite() && g >= 0.0 && g.is_finite()) {
                return Err(ProfileError::InvalidSpec {
                    id: self.prosumer_id.clone(),
                    reason: format!("negative or non-finite energy at hour {t}"),
                });
            }
        }
        Ok(())
    }

    /// Checks that generation is zero at every night hour for the site.
    pub fn validate_daylight(&self, daylight: &DaylightTable) -> Result<(), ProfileError> {
        use chrono::{Datelike, Timelike};
        for (t, &g) in self.generation.iter().enumerate() {
            let ts = self.timestamp(t);
            if g > 0.0 && !daylight.flag(ts.ordinal(), ts.hour()) {
                return Err(ProfileError::InvalidSpec {
                    id: self.prosumer_id.clone(),
                    reason: format!("generation {g} at night hour {ts}"),
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pv_target_is_forty_percent() {
        assert_eq!(pv_energy_target(10_000.0).unwrap(), 4_000.0);
        assert!(pv_energy_target(0.0).is_err());
        let kwp = size_pv_capacity(5_000.0, 900.0).unwrap();
        assert!((kwp - 2_000.0 / 900.0).abs() < 1e-12);
        assert!((kwp - 2.22).abs() < 0.01);
    }

    #[test]
    fn default_community_composition() {
        let specs = default_community(DEFAULT_YIELD_KWH_PER_KWP);
        assert_eq!(specs.len(), 10);
        let count = |k| specs.iter().filter(|s| s.kind == k).count();
        assert_eq!(count(ProsumerKind::DairyFarm), 4);
        assert_eq!(count(ProsumerKind::Household), 4);
        assert_eq!(count(ProsumerKind::HouseholdWithEv), 2);
        assert!(specs.iter().all(|s| s.validate().is_ok()));
    }

    #[test]
    fn spec_validation_rejects_bad_values() {
        let mut s = ProsumerSpec::sized("x", ProsumerKind::Household, 5_000.0, 900.0).unwrap();
        s.annual_load = -1.0;
        assert!(s.validate().is_err());
        s.annual_load = 1.0;
        s.pv_capacity = -0.1;
        assert!(s.validate().is_err());
    }
}
