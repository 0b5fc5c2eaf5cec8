//! Command-line orchestration for the p2p energy trading simulator:
//! configuration, scenario assembly and the five run commands.

// `!(x > 0)` style guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod commands;
pub mod config;
pub mod manifest;
pub mod scenario;

use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};
use thiserror::Error;

pub use config::RunConfig;

/// Exit code for configuration and input problems.
pub const EXIT_VALIDATION: i32 = 2;
/// Exit code for failures while running.
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("run failed: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) => EXIT_VALIDATION,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

macro_rules! runtime_from {
    ($($t:ty),*) => {$(
        impl From<$t> for CliError {
            fn from(e: $t) -> Self {
                CliError::Runtime(e.to_string())
            }
        }
    )*};
}

runtime_from!(
    std::io::Error,
    csv::Error,
    serde_json::Error,
    p2p_core::env::EnvError,
    p2p_core::ktu::KtuError,
    p2p_core::agents::AgentError,
    p2p_core::profiles::ProfileError
);

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Toggle {
    On,
    Off,
}

impl Toggle {
    pub fn enabled(self) -> bool {
        self == Toggle::On
    }
}

#[derive(Debug, Parser)]
#[command(name = "p2p-sim", version, about = "Multi-agent p2p energy trading with uncertainty-aware forecasts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration; built-in defaults when omitted.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the configured seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the configured output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Market switch. For `evaluate` it restricts the grid to one setting.
    #[arg(long, global = true, value_enum)]
    pub p2p: Option<Toggle>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train the probabilistic load/PV forecaster.
    TrainForecaster,
    /// Train one independent DQN learner per prosumer.
    TrainAgents,
    /// Run the market-by-policy KPI grid.
    Evaluate,
    /// Random search over forecaster hyperparameters.
    HpSearch {
        #[arg(long)]
        trials: Option<usize>,
    },
    /// Write synthetic prosumer profiles.
    GenerateProfiles,
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::TrainForecaster => "train-forecaster",
            Command::TrainAgents => "train-agents",
            Command::Evaluate => "evaluate",
            Command::HpSearch { .. } => "hp-search",
            Command::GenerateProfiles => "generate-profiles",
        }
    }
}

/// Loads the config and applies command-line overrides.
pub fn effective_config(cli: &Cli) -> Result<RunConfig, CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out_dir = out.clone();
    }
    if let Some(p2p) = cli.p2p {
        cfg.p2p_enabled = p2p.enabled();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs one command and returns the directory it wrote to.
pub fn run(cli: &Cli) -> Result<PathBuf, CliError> {
    let cfg = effective_config(cli)?;
    match &cli.command {
        Command::TrainForecaster => commands::train_forecaster(&cfg),
        Command::TrainAgents => commands::train_agents(&cfg),
        Command::Evaluate => commands::evaluate(&cfg, cli.p2p.map(Toggle::enabled)),
        Command::HpSearch { trials } => commands::hp_search(&cfg, *trials),
        Command::GenerateProfiles => commands::generate_profiles(&cfg),
    }
}
