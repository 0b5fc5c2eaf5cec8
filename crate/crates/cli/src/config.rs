//! Run configuration: one TOML file per run. Every constant the simulation
//! does not derive from data is surfaced here.

use std::path::{Path, PathBuf};

use p2p_core::agents::{LearnerConfig, StateMode};
use p2p_core::env::{OracleNoise, TrainingConfig};
use p2p_core::ktu::KtuConfig;
use p2p_core::profiles::{default_community, ProsumerSpec, SyntheticConfig, DEFAULT_YIELD_KWH_PER_KWP};
use p2p_core::rewards::TariffCalendar;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: String,
    pub seed: u64,
    pub out_dir: PathBuf,
    pub p2p_enabled: bool,
    pub profiles: ProfilesConfig,
    pub battery: BatteryConfig,
    pub forecaster: ForecasterConfig,
    pub agents: AgentsConfig,
    pub evaluation: EvaluationConfig,
    pub search: SearchConfig,
    pub calendar: TariffCalendar,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            scenario: "desk".into(),
            seed: 0,
            out_dir: PathBuf::from("runs/desk"),
            p2p_enabled: true,
            profiles: ProfilesConfig::default(),
            battery: BatteryConfig::default(),
            forecaster: ForecasterConfig::default(),
            agents: AgentsConfig::default(),
            evaluation: EvaluationConfig::default(),
            search: SearchConfig::default(),
            calendar: TariffCalendar::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProfilesConfig {
    /// Measured profiles; synthetic ones are generated when absent.
    pub csv: Option<PathBuf>,
    /// Prosumer ids to simulate, all of `specs` when empty.
    pub select: Vec<String>,
    pub specs: Vec<ProsumerSpec>,
    pub synthetic: SyntheticConfig,
}

impl Default for ProfilesConfig {
    fn default() -> Self {
        Self {
            csv: None,
            select: vec!["farm-1".into(), "house-1".into(), "ev-house-1".into()],
            specs: default_community(DEFAULT_YIELD_KWH_PER_KWP),
            synthetic: SyntheticConfig::default(),
        }
    }
}

impl ProfilesConfig {
    pub fn selected_specs(&self) -> Result<Vec<ProsumerSpec>, CliError> {
        if self.select.is_empty() {
            return Ok(self.specs.clone());
        }
        self.select
            .iter()
            .map(|id| {
                self.specs
                    .iter()
                    .find(|s| &s.id == id)
                    .cloned()
                    .ok_or_else(|| CliError::Validation(format!("profiles.select: unknown prosumer `{id}`")))
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BatteryConfig {
    pub round_trip_efficiency: f64,
    /// Initial state of charge as a fraction of capacity.
    pub initial_soc: f64,
    pub household_power_kw: f64,
    pub farm_power_kw: f64,
}

impl Default for BatteryConfig {
    fn default() -> Self {
        Self { round_trip_efficiency: 0.9, initial_soc: 0.5, household_power_kw: 5.0, farm_power_kw: 10.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForecastSource {
    /// Trained forecaster checkpoint.
    Ktu,
    /// True future plus noise.
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecasterConfig {
    pub source: ForecastSource,
    /// Checkpoint used by the agent commands when `source = "ktu"`.
    pub checkpoint: Option<PathBuf>,
    pub model: KtuConfig,
    pub n_lags: usize,
    pub train_fraction: f64,
    pub validation_fraction: f64,
    /// Keep every k-th window of each split.
    pub sample_stride: usize,
    pub oracle_noise: OracleNoise,
    pub interval_samples: usize,
    pub interval_level: f64,
}

impl Default for ForecasterConfig {
    fn default() -> Self {
        Self {
            source: ForecastSource::Oracle,
            checkpoint: None,
            model: KtuConfig::default(),
            n_lags: 1,
            train_fraction: 0.7,
            validation_fraction: 0.15,
            sample_stride: 1,
            oracle_noise: OracleNoise::default(),
            interval_samples: 200,
            interval_level: 0.9,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PolicyFamily {
    RuleBased,
    /// DQN with the forecast components of the state zeroed.
    Dqn,
    DqnForecast,
}

impl PolicyFamily {
    pub const ALL: [PolicyFamily; 3] = [PolicyFamily::RuleBased, PolicyFamily::Dqn, PolicyFamily::DqnForecast];

    pub fn slug(self) -> &'static str {
        match self {
            PolicyFamily::RuleBased => "rule_based",
            PolicyFamily::Dqn => "dqn",
            PolicyFamily::DqnForecast => "dqn_forecast",
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            PolicyFamily::RuleBased => "Rule-Based",
            PolicyFamily::Dqn => "DQN",
            PolicyFamily::DqnForecast => "DQN+Forecasting",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentsConfig {
    pub learner: LearnerConfig,
    pub training: TrainingConfig,
    /// Learned families to train.
    pub families: Vec<PolicyFamily>,
    /// State layout of the forecast-aware family.
    pub forecast_state: StateMode,
    /// Where policies are written and read; `<out>/agents` when absent.
    pub checkpoint_dir: Option<PathBuf>,
}

impl Default for AgentsConfig {
    fn default() -> Self {
        Self {
            learner: LearnerConfig { batch_size: 32, epsilon_decay_steps: 6_000, ..LearnerConfig::default() },
            training: TrainingConfig {
                total_steps: 20_000,
                episode_hours: 30 * 24,
                train_start: 48,
                train_end: 24 * 240,
                eval_every: 250,
                eval_start: 24 * 241,
                eval_hours: 30 * 24,
                seed: 0,
            },
            families: vec![PolicyFamily::Dqn, PolicyFamily::DqnForecast],
            forecast_state: StateMode::Summary,
            checkpoint_dir: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    pub episodes: usize,
    pub episode_hours: usize,
    /// Episodes start on seeded random days in `start..start + 24·span_days`.
    pub start: usize,
    pub span_days: usize,
    /// Exploration during evaluation; the learner's final epsilon when absent.
    pub epsilon: Option<f64>,
    pub families: Vec<PolicyFamily>,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        Self { episodes: 10, episode_hours: 30 * 24, start: 24 * 300, span_days: 30, epsilon: None, families: PolicyFamily::ALL.to_vec() }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub min: f64,
    pub max: f64,
}

impl Bounds {
    pub fn point(x: f64) -> Self {
        Self { min: x, max: x }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SearchConfig {
    pub trials: usize,
    /// Epoch budget of each trial.
    pub max_epochs: usize,
    /// Sampled log-uniformly.
    pub learning_rate: Bounds,
    pub batch_size: Vec<usize>,
    pub d_model: Vec<usize>,
    pub n_heads: Vec<usize>,
    pub d_ff: Vec<usize>,
    pub dropout: Bounds,
    pub alpha_smooth: Bounds,
    pub beta_night: Bounds,
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            trials: 8,
            max_epochs: 3,
            learning_rate: Bounds { min: 1e-4, max: 3e-3 },
            batch_size: vec![16, 32, 64],
            d_model: vec![8, 16, 32],
            n_heads: vec![1, 2, 4],
            d_ff: vec![32, 64],
            dropout: Bounds { min: 0.0, max: 0.3 },
            alpha_smooth: Bounds { min: 0.001, max: 0.05 },
            beta_night: Bounds { min: 0.01, max: 0.5 },
        }
    }
}

impl RunConfig {
    /// Keys absent from `text` keep the values of [`RunConfig::default`], also
    /// inside partially given tables.
    pub fn parse(text: &str) -> Result<Self, CliError> {
        let invalid = |e: toml::de::Error| CliError::Validation(format!("config: {e}"));
        let user: toml::Table = toml::from_str(text).map_err(invalid)?;
        let mut merged = toml::Table::try_from(Self::default()).expect("defaults serialize");
        merge(&mut merged, user);
        toml::Value::Table(merged).try_into().map_err(invalid)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Validation(format!("config file {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    /// Canonical text form: field order fixed by the struct.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn hash(&self) -> String {
        hex(&Sha256::digest(self.to_toml().as_bytes()))
    }

    /// Field-by-field checks that need no I/O beyond path existence.
    pub fn validate(&self) -> Result<(), CliError> {
        let bad = |field: &str, reason: String| Err(CliError::Validation(format!("{field}: {reason}")));
        if let Some(p) = &self.profiles.csv {
            if !p.exists() {
                return bad("profiles.csv", format!("file {} does not exist", p.display()));
            }
        }
        if let Some(p) = &self.forecaster.checkpoint {
            if !p.exists() {
                return bad("forecaster.checkpoint", format!("file {} does not exist", p.display()));
            }
        }
        if i64::try_from(self.seed).is_err() {
            return bad("seed", format!("{} does not fit a TOML integer (max {})", self.seed, i64::MAX));
        }
        self.profiles.selected_specs()?;
        for s in &self.profiles.specs {
            s.validate().map_err(|e| CliError::Validation(format!("profiles.specs: {e}")))?;
        }
        let b = &self.battery;
        if !(b.round_trip_efficiency > 0.0 && b.round_trip_efficiency <= 1.0) {
            return bad("battery.round_trip_efficiency", "must be in (0, 1]".into());
        }
        if !(0.0..=1.0).contains(&b.initial_soc) {
            return bad("battery.initial_soc", "must be in [0, 1]".into());
        }
        if !(b.household_power_kw >= 0.0 && b.farm_power_kw >= 0.0) {
            return bad("battery", "power must be non-negative".into());
        }
        self.calendar.validate().map_err(|e| CliError::Validation(format!("calendar: {e}")))?;
        let f = &self.forecaster;
        f.model.validate().map_err(|e| CliError::Validation(format!("forecaster.model: {e}")))?;
        if f.n_lags == 0 {
            return bad("forecaster.n_lags", "must be at least 1".into());
        }
        if !(f.train_fraction > 0.0 && f.validation_fraction > 0.0 && f.train_fraction + f.validation_fraction < 1.0) {
            return bad("forecaster.train_fraction", "train and validation fractions must be positive and sum below 1".into());
        }
        if f.sample_stride == 0 {
            return bad("forecaster.sample_stride", "must be at least 1".into());
        }
        if f.interval_samples < 100 || !(f.interval_level > 0.0 && f.interval_level < 1.0) {
            return bad("forecaster.interval_samples", "need at least 100 samples and a level in (0, 1)".into());
        }
        self.agents.learner.validate().map_err(|e| CliError::Validation(format!("agents.learner: {e}")))?;
        let t = &self.agents.training;
        if t.episode_hours == 0 || t.train_end < t.train_start + t.episode_hours {
            return bad("agents.training", "training range must hold at least one episode".into());
        }
        if self.agents.families.contains(&PolicyFamily::RuleBased) {
            return bad("agents.families", "the rule-based policy is not trained".into());
        }
        let e = &self.evaluation;
        if e.episodes == 0 || e.episode_hours == 0 {
            return bad("evaluation", "episodes and episode_hours must be positive".into());
        }
        if e.families.is_empty() {
            return bad("evaluation.families", "empty".into());
        }
        if let Some(eps) = e.epsilon {
            if !(0.0..=1.0).contains(&eps) {
                return bad("evaluation.epsilon", "must be in [0, 1]".into());
            }
        }
        Ok(())
    }

    pub fn checkpoint_dir(&self) -> PathBuf {
        self.agents.checkpoint_dir.clone().unwrap_or_else(|| self.out_dir.join("agents"))
    }

    pub fn evaluation_epsilon(&self) -> f64 {
        self.evaluation.epsilon.unwrap_or(self.agents.learner.epsilon_end)
    }
}

/// Tables merge key by key; everything else is replaced.
fn merge(base: &mut toml::Table, over: toml::Table) {
    for (k, v) in over {
        match (base.get_mut(&k), v) {
            (Some(toml::Value::Table(b)), toml::Value::Table(o)) => merge(b, o),
            (_, v) => {
                base.insert(k, v);
            }
        }
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
