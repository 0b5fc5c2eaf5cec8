//! Community simulation: battery dynamics, action translation, market
//! clearing, rewards, episodes, KPIs and the independent-learner training
//! loop. Works in `f64`.

mod battery;
mod episode;
mod forecast;
mod policy;
mod training;
mod translate;
mod world;

use thiserror::Error;

pub use battery::{apply_battery, BatteryDirection, BatteryState};
pub use episode::{kpi_report, run_episode, write_rows, AgentTotals, EpisodeLog, KpiReport, KpiSummary, PriceRow, SocProfileRow, StepRow, SummaryStat, TradeRow};
pub use forecast::{ForecastTable, OracleNoise};
pub use policy::Policy;
pub use training::{dqn_policies, steps_to_fraction, train_agents, CurvePoint, EvalPoint, LearnerSetup, TrainingConfig, TrainingOutcome};
pub use translate::{translate_action, ActionFlows};
pub use world::{check_invariants, AgentSetup, AgentStep, Environment, StepResult, WorldState, CONSERVATION_TOL};

#[derive(Debug, Error)]
pub enum EnvError {
    #[error("invalid battery: {0}")]
    InvalidBattery(String),
    #[error("invariant violated: {0}")]
    Invariant(String),
    #[error("no forecast for agent {agent} at hour {hour}")]
    MissingForecast { agent: usize, hour: usize },
    #[error("inputs do not line up: {0}")]
    Misaligned(String),
    #[error("invalid span: {0}")]
    InvalidSpan(String),
    #[error("forecast: {0}")]
    Forecast(String),
    #[error(transparent)]
    Market(#[from] crate::market::MarketError),
    #[error(transparent)]
    Reward(#[from] crate::rewards::RewardError),
    #[error(transparent)]
    Agent(#[from] crate::agents::AgentError),
    #[error(transparent)]
    Ktu(#[from] crate::ktu::KtuError),
    #[error(transparent)]
    Profile(#[from] crate::profiles::ProfileError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `G − L`; positive is surplus.
pub fn energy_balance(generation: f64, load: f64) -> f64 {
    generation - load
}
