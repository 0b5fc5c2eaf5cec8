//! Synthetic Finnish-style load and PV generator.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDate, Timelike, Weekday};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DaylightTable, EnergyProfile, ProfileError, ProsumerKind, ProsumerSpec};

pub const HOURS_PER_YEAR: usize = 8760;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SyntheticConfig {
    pub latitude: f64,
    /// kWh per kWp per year.
    pub yield_kwh_per_kwp: f64,
    /// Non-leap year the series covers.
    pub year: i32,
    /// Extra load per hour during the weekday evening charging block.
    pub ev_block_kwh: f64,
    /// Uniform multiplicative load noise half-width.
    pub load_noise: f64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            latitude: super::HELSINKI_LATITUDE,
            yield_kwh_per_kwp: super::DEFAULT_YIELD_KWH_PER_KWP,
            year: 2023,
            ev_block_kwh: 3.0,
            load_noise: 0.10,
        }
    }
}

// Hour-of-day base shapes (arbitrary units, renormalised later).
const HOUSEHOLD_SHAPE: [f64; 24] = [
    0.55, 0.50, 0.48, 0.47, 0.48, 0.55, 0.75, 1.00, 1.05, 0.90, 0.80, 0.78, //
    0.80, 0.78, 0.78, 0.85, 1.00, 1.25, 1.40, 1.45, 1.35, 1.15, 0.90, 0.70,
];
const FARM_SHAPE: [f64; 24] = [
    0.70, 0.68, 0.68, 0.70, 0.85, 1.30, 1.45, 1.30, 1.05, 0.95, 0.92, 0.92, //
    0.95, 0.95, 0.98, 1.10, 1.35, 1.45, 1.30, 1.05, 0.90, 0.82, 0.76, 0.72,
];
// Month multipliers (Jan..Dec); heating dominates households.
const HOUSEHOLD_SEASON: [f64; 12] = [1.45, 1.40, 1.20, 1.00, 0.80, 0.65, 0.62, 0.68, 0.82, 1.02, 1.25, 1.42];
const FARM_SEASON: [f64; 12] = [1.12, 1.10, 1.05, 1.00, 0.95, 0.92, 0.90, 0.92, 0.96, 1.00, 1.06, 1.10];

const EV_HOURS: std::ops::RangeInclusive<u32> = 18..=21;

/// FNV-1a, for a stable per-prosumer seed independent of list order.
fn stable_hash(s: &str) -> u64 {
    s.bytes().fold(0xcbf2_9ce4_8422_2325, |h, b| (h ^ u64::from(b)).wrapping_mul(0x0100_0000_01b3))
}

pub fn generate_synthetic_profiles(specs: &[ProsumerSpec], seed: u64, cfg: &SyntheticConfig) -> Result<Vec<EnergyProfile>, ProfileError> {
    if specs.is_empty() {
        return Err(ProfileError::Empty);
    }
    let daylight = DaylightTable::new(cfg.latitude)?;
    specs.iter().map(|spec| generate_one(spec, seed, cfg, &daylight)).collect()
}

fn generate_one(spec: &ProsumerSpec, seed: u64, cfg: &SyntheticConfig, daylight: &DaylightTable) -> Result<EnergyProfile, ProfileError> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ stable_hash(&spec.id));
    let start = NaiveDate::from_ymd_opt(cfg.year, 1, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .ok_or_else(|| ProfileError::InvalidSpec { id: spec.id.clone(), reason: format!("bad year {}", cfg.year) })?;

    let (shape, season) = match spec.kind {
        ProsumerKind::DairyFarm => (&FARM_SHAPE, &FARM_SEASON),
        ProsumerKind::Household | ProsumerKind::HouseholdWithEv => (&HOUSEHOLD_SHAPE, &HOUSEHOLD_SEASON),
    };

    let mut base = Vec::with_capacity(HOURS_PER_YEAR);
    let mut ev = vec![0.0; HOURS_PER_YEAR];
    let mut pv = Vec::with_capacity(HOURS_PER_YEAR);
    let mut day_weather = 1.0;
    for t in 0..HOURS_PER_YEAR {
        let ts = start + chrono::Duration::hours(t as i64);
        let hour = ts.hour();
        let doy = ts.ordinal();
        let noise = 1.0 + rng.random_range(-cfg.load_noise..=cfg.load_noise);
        base.push(shape[hour as usize] * season[ts.month0() as usize] * noise);

        let weekday = !matches!(ts.weekday(), Weekday::Sat | Weekday::Sun);
        if spec.kind == ProsumerKind::HouseholdWithEv && weekday && EV_HOURS.contains(&hour) {
            ev[t] = cfg.ev_block_kwh;
        }

        if hour == 0 {
            day_weather = rng.random_range(0.25..=1.0);
        }
        let day = daylight.day(doy);
        let g = if day.is_daylight(hour) {
            let bell = (PI * (f64::from(hour) + 0.5 - day.sunrise) / day.daylight_hours).sin().max(0.0);
            let noon_elevation = (90.0 - (cfg.latitude - super::declination_deg(doy)).abs()).to_radians().sin().max(0.0);
            bell * noon_elevation * day_weather * rng.random_range(0.9..=1.1)
        } else {
            0.0
        };
        pv.push(g);
    }

    let ev_total: f64 = ev.iter().sum();
    if spec.annual_load <= ev_total {
        return Err(ProfileError::InvalidSpec {
            id: spec.id.clone(),
            reason: format!("annual_load {} does not cover the EV block ({ev_total} kWh)", spec.annual_load),
        });
    }
    let base_scale = (spec.annual_load - ev_total) / base.iter().sum::<f64>();
    let load = base.iter().zip(&ev).map(|(b, e)| b * base_scale + e).collect();

    let pv_target = spec.pv_capacity * cfg.yield_kwh_per_kwp;
    let pv_raw: f64 = pv.iter().sum();
    let pv_scale = if pv_raw > 0.0 { pv_target / pv_raw } else { 0.0 };
    let generation = pv.iter().map(|g| g * pv_scale).collect();

    Ok(EnergyProfile { prosumer_id: spec.id.clone(), start, load, generation })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::profiles::{default_community, HELSINKI_LATITUDE};

    #[test]
    fn annual_load_is_normalised() {
        let spec = ProsumerSpec::sized("h", ProsumerKind::Household, 5_000.0, 900.0).unwrap();
        let p = &generate_synthetic_profiles(&[spec], 1, &SyntheticConfig::default()).unwrap()[0];
        assert_eq!(p.len(), HOURS_PER_YEAR);
        assert!((p.total_load() - 5_000.0).abs() <= 0.05 * 5_000.0);
    }

    #[test]
    fn generation_is_zero_at_night_and_sized() {
        let cfg = SyntheticConfig::default();
        let profiles = generate_synthetic_profiles(&default_community(900.0), 3, &cfg).unwrap();
        let table = DaylightTable::new(HELSINKI_LATITUDE).unwrap();
        for p in &profiles {
            p.validate().unwrap();
            p.validate_daylight(&table).unwrap();
            let ratio = p.total_generation() / p.total_load();
            assert!((0.36..=0.44).contains(&ratio), "{}: {ratio}", p.prosumer_id);
        }
    }

    #[test]
    fn same_seed_same_profiles() {
        let specs = default_community(900.0);
        let cfg = SyntheticConfig::default();
        let a = generate_synthetic_profiles(&specs, 42, &cfg).unwrap();
        let b = generate_synthetic_profiles(&specs, 42, &cfg).unwrap();
        assert_eq!(a, b);
        let c = generate_synthetic_profiles(&specs, 43, &cfg).unwrap();
        assert_ne!(a, c);
        // Call order does not matter.
        let reversed: Vec<_> = specs.iter().rev().cloned().collect();
        let d = generate_synthetic_profiles(&reversed, 42, &cfg).unwrap();
        assert_eq!(a[0], d[d.len() - 1]);
    }

    #[test]
    fn ev_block_adds_evening_load() {
        let spec = ProsumerSpec::sized("ev", ProsumerKind::HouseholdWithEv, 14_000.0, 900.0).unwrap();
        let p = &generate_synthetic_profiles(&[spec], 5, &SyntheticConfig::default()).unwrap()[0];
        // 2023-01-02 is a Monday: 19:00 carries the EV block, 23:00 does not.
        assert!(p.load[24 + 19] > 3.0);
        assert!(p.load[24 + 23] < 3.0);
    }

    #[test]
    fn rejects_non_positive_load() {
        let spec = ProsumerSpec { id: "z".into(), kind: ProsumerKind::Household, annual_load: 0.0, pv_capacity: 0.0, battery_capacity: 0.0 };
        assert!(generate_synthetic_profiles(&[spec], 1, &SyntheticConfig::default()).is_err());
        assert!(generate_synthetic_profiles(&[], 1, &SyntheticConfig::default()).is_err());
    }
}
