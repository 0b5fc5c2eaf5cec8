//! Builds profiles, forecasts and the environment from a run config.

use std::path::PathBuf;

use p2p_core::env::{AgentSetup, BatteryState, Environment, ForecastTable};
use p2p_core::ktu::{KtuCheckpoint, KtuModel};
use p2p_core::profiles::{
    build_windows, encode_profile, generate_synthetic_profiles, load_profiles_csv, DatasetSplits, EnergyProfile, FeatureEncoder, NormStats,
    ProsumerKind, ProsumerSpec, WindowedDataset,
};

use crate::config::ForecastSource;
use crate::{CliError, RunConfig};

#[derive(Debug, Clone)]
pub struct Community {
    pub specs: Vec<ProsumerSpec>,
    pub profiles: Vec<EnergyProfile>,
}

impl Community {
    pub fn kinds(&self) -> Vec<ProsumerKind> {
        self.specs.iter().map(|s| s.kind).collect()
    }
}

pub fn load_community(cfg: &RunConfig) -> Result<Community, CliError> {
    let specs = cfg.profiles.selected_specs()?;
    let profiles = match &cfg.profiles.csv {
        Some(path) => {
            let all = load_profiles_csv(path)?;
            specs
                .iter()
                .map(|s| {
                    all.iter().find(|p| p.prosumer_id == s.id).cloned().ok_or_else(|| {
                        CliError::Validation(format!("profiles.csv: {} has no series for prosumer `{}`", path.display(), s.id))
                    })
                })
                .collect::<Result<Vec<_>, _>>()?
        }
        None => generate_synthetic_profiles(&specs, cfg.seed, &cfg.profiles.synthetic)?,
    };
    Ok(Community { specs, profiles })
}

pub fn agent_setups(cfg: &RunConfig, community: &Community) -> Result<Vec<AgentSetup>, CliError> {
    let b = &cfg.battery;
    community
        .specs
        .iter()
        .map(|s| {
            let power = match s.kind {
                ProsumerKind::DairyFarm => b.farm_power_kw,
                ProsumerKind::Household | ProsumerKind::HouseholdWithEv => b.household_power_kw,
            };
            let battery = if s.battery_capacity > 0.0 {
                BatteryState::new(s.battery_capacity, power, b.round_trip_efficiency, b.initial_soc)?
            } else {
                BatteryState::none()
            };
            Ok(AgentSetup { id: s.id.clone(), kind: s.kind, battery })
        })
        .collect()
}

/// Encoder and datasets for forecaster training; every profile is split
/// chronologically on its own, then the splits are pooled.
pub fn forecast_data(cfg: &RunConfig, community: &Community) -> Result<(DatasetSplits<f64>, FeatureEncoder), CliError> {
    let f = &cfg.forecaster;
    let stats = NormStats::fit(&community.profiles, f.train_fraction);
    let encoder = FeatureEncoder::new(cfg.profiles.synthetic.latitude, stats, f.n_lags)?;
    let (window, horizon) = (f.model.window, f.model.horizon);
    let empty = || WindowedDataset::empty(window, horizon);
    let mut splits = DatasetSplits { train: empty(), validation: empty(), test: empty() };
    for (p, kind) in community.profiles.iter().zip(community.kinds()) {
        let features = encode_profile(&encoder, p, kind)?;
        let mut s = build_windows(p, &features, window, horizon)?.split(f.train_fraction, f.validation_fraction);
        for part in [&mut s.train, &mut s.validation, &mut s.test] {
            let kept = part.samples.drain(..).step_by(f.sample_stride).collect();
            part.samples = kept;
        }
        splits.extend(s);
    }
    Ok((splits, encoder))
}

pub fn ktu_checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.forecaster.checkpoint.clone().unwrap_or_else(|| cfg.out_dir.join("forecaster").join("ktu.json"))
}

/// Forecaster and matching encoder from a checkpoint written by `train-forecaster`.
pub fn load_forecaster(cfg: &RunConfig) -> Result<(KtuModel<f64>, FeatureEncoder), CliError> {
    let path = ktu_checkpoint_path(cfg);
    if !path.exists() {
        return Err(CliError::Validation(format!(
            "forecaster.checkpoint: {} does not exist (run train-forecaster or set forecaster.source = \"oracle\")",
            path.display()
        )));
    }
    let ckpt = KtuCheckpoint::load(&path)?;
    let field = |name: &str| {
        ckpt.extra.get(name).cloned().ok_or_else(|| CliError::Validation(format!("{}: checkpoint lacks `{name}`", path.display())))
    };
    let stats: NormStats = serde_json::from_value(field("norm_stats")?)?;
    let latitude: f64 = serde_json::from_value(field("latitude")?)?;
    let n_lags: usize = serde_json::from_value(field("n_lags")?)?;
    let model = ckpt.to_model::<f64>(None)?;
    Ok((model, FeatureEncoder::new(latitude, stats, n_lags)?))
}

pub fn forecast_table(cfg: &RunConfig, community: &Community) -> Result<ForecastTable, CliError> {
    match cfg.forecaster.source {
        ForecastSource::Oracle => Ok(ForecastTable::oracle(&community.profiles, cfg.forecaster.model.horizon, cfg.forecaster.oracle_noise, cfg.seed)?),
        ForecastSource::Ktu => {
            let (model, encoder) = load_forecaster(cfg)?;
            let len = community.profiles.first().map_or(0, EnergyProfile::len);
            Ok(ForecastTable::from_ktu(&model, &encoder, &community.profiles, &community.kinds(), 0..len)?)
        }
    }
}

pub fn environment(cfg: &RunConfig, community: &Community, forecasts: ForecastTable) -> Result<Environment, CliError> {
    let agents = agent_setups(cfg, community)?;
    Ok(Environment::new(agents, community.profiles.clone(), forecasts, cfg.calendar.clone(), cfg.p2p_enabled)?)
}
