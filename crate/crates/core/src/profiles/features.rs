//! Model input encoding: cyclical time, season, size, daylight, lags.

use std::f64::consts::PI;

use chrono::{Datelike, NaiveDateTime, Timelike};
use serde::{Deserialize, Serialize};

use super::{DaylightTable, EnergyProfile, ProfileError, ProsumerKind};

/// Meteorological seasons.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Season {
    Winter,
    Spring,
    Summer,
    Autumn,
}

impl Season {
    pub fn of_month(month: u32) -> Self {
        match month {
            12 | 1 | 2 => Season::Winter,
            3..=5 => Season::Spring,
            6..=8 => Season::Summer,
            _ => Season::Autumn,
        }
    }

    pub fn one_hot(self) -> [f64; 4] {
        let mut v = [0.0; 4];
        v[self as usize] = 1.0;
        v
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    pub hour_sin: f64,
    pub hour_cos: f64,
    pub day_sin: f64,
    pub day_cos: f64,
    pub season: [f64; 4],
    pub size_category: f64,
    pub daylight_flag: f64,
    pub norm_daylight: f64,
    /// Most recent first, z-scored.
    pub lagged_load: Vec<f64>,
    /// Most recent first, z-scored.
    pub lagged_generation: Vec<f64>,
}

impl FeatureVector {
    pub fn dim(n_lags: usize) -> usize {
        11 + 2 * n_lags
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(Self::dim(self.lagged_load.len()));
        v.extend_from_slice(&[self.hour_sin, self.hour_cos, self.day_sin, self.day_cos]);
        v.extend_from_slice(&self.season);
        v.extend_from_slice(&[self.size_category, self.daylight_flag, self.norm_daylight]);
        v.extend_from_slice(&self.lagged_load);
        v.extend_from_slice(&self.lagged_generation);
        v
    }
}

/// Z-score statistics fitted on the training split only.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub load_mean: f64,
    pub load_std: f64,
    pub gen_mean: f64,
    pub gen_std: f64,
}

impl NormStats {
    /// Fits on the leading `train_fraction` of every profile.
    pub fn fit(profiles: &[EnergyProfile], train_fraction: f64) -> Self {
        let mut load = Vec::new();
        let mut gen = Vec::new();
        for p in profiles {
            let n = ((p.len() as f64) * train_fraction).floor() as usize;
            load.extend_from_slice(&p.load[..n.min(p.len())]);
            gen.extend_from_slice(&p.generation[..n.min(p.len())]);
        }
        let (load_mean, load_std) = mean_std(&load);
        let (gen_mean, gen_std) = mean_std(&gen);
        Self { load_mean, load_std, gen_mean, gen_std }
    }

    pub fn identity() -> Self {
        Self { load_mean: 0.0, load_std: 1.0, gen_mean: 0.0, gen_std: 1.0 }
    }
}

fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 1.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    (mean, if std > 1e-12 { std } else { 1.0 })
}

/// Trailing observations, oldest first; the last entry is the current hour.
#[derive(Debug, Clone, Copy)]
pub struct LagContext<'a> {
    pub load: &'a [f64],
    pub generation: &'a [f64],
}

#[derive(Debug, Clone)]
pub struct FeatureEncoder {
    daylight: DaylightTable,
    stats: NormStats,
    n_lags: usize,
}

impl FeatureEncoder {
    pub fn new(latitude: f64, stats: NormStats, n_lags: usize) -> Result<Self, ProfileError> {
        Ok(Self { daylight: DaylightTable::new(latitude)?, stats, n_lags: n_lags.max(1) })
    }

    pub fn n_lags(&self) -> usize {
        self.n_lags
    }

    pub fn dim(&self) -> usize {
        FeatureVector::dim(self.n_lags)
    }

    pub fn stats(&self) -> &NormStats {
        &self.stats
    }

    pub fn daylight(&self) -> &DaylightTable {
        &self.daylight
    }

    pub fn encode(&self, timestamp: NaiveDateTime, history: LagContext<'_>, kind: ProsumerKind) -> Result<FeatureVector, ProfileError> {
        let available = history.load.len().min(history.generation.len());
        if available < self.n_lags {
            return Err(ProfileError::InsufficientHistory { needed: self.n_lags, available });
        }
        let hour = timestamp.hour();
        let doy = timestamp.ordinal();
        let hour_angle = 2.0 * PI * f64::from(hour) / 24.0;
        let day_angle = 2.0 * PI * f64::from(doy - 1) / 365.0;
        let s = &self.stats;
        let lagged = |series: &[f64], mean: f64, std: f64| -> Vec<f64> {
            series.iter().rev().take(self.n_lags).map(|x| (x - mean) / std).collect()
        };
        Ok(FeatureVector {
            hour_sin: hour_angle.sin(),
            hour_cos: hour_angle.cos(),
            day_sin: day_angle.sin(),
            day_cos: day_angle.cos(),
            season: Season::of_month(timestamp.month()).one_hot(),
            size_category: kind.size_category(),
            daylight_flag: if self.daylight.flag(doy, hour) { 1.0 } else { 0.0 },
            norm_daylight: self.daylight.normalized(doy),
            lagged_load: lagged(history.load, s.load_mean, s.load_std),
            lagged_generation: lagged(history.generation, s.gen_mean, s.gen_std),
        })
    }
}

/// Encoded features for hours `start..start + rows.len()` of one profile.
#[derive(Debug, Clone)]
pub struct FeatureSeries {
    pub start: usize,
    pub rows: Vec<FeatureVector>,
}

/// Encodes every hour that has enough lag history.
pub fn encode_profile(encoder: &FeatureEncoder, profile: &EnergyProfile, kind: ProsumerKind) -> Result<FeatureSeries, ProfileError> {
    let start = encoder.n_lags() - 1;
    if profile.len() <= start {
        return Err(ProfileError::InsufficientHistory { needed: encoder.n_lags(), available: profile.len() });
    }
    let rows = (start..profile.len())
        .map(|t| {
            let ctx = LagContext { load: &profile.load[..=t], generation: &profile.generation[..=t] };
            encoder.encode(profile.timestamp(t), ctx, kind)
        })
        .collect::<Result<_, _>>()?;
    Ok(FeatureSeries { start, rows })
}
