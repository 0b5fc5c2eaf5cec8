//! Independent DQN learners: state construction, Q-network, replay, TD
//! updates with a target network, and a rule-based baseline.

mod checkpoint;
mod learner;
mod qnet;
mod replay;
mod rules;
mod state;

use thiserror::Error;

pub use checkpoint::{PolicyCheckpoint, POLICY_FORMAT, POLICY_VERSION};
pub use learner::{epsilon_at, select_action, td_update, DqnAgent, LearnerConfig};
pub use qnet::QNetwork;
pub use replay::{ReplayBuffer, Transition};
pub use rules::rule_based_policy;
pub use state::{build_state, StateMode, StateSpec, StateVector};

#[derive(Debug, Error)]
pub enum AgentError {
    #[error("invalid learner config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("no forecast available for the current step")]
    MissingForecast,
    #[error("state has {found} components, network expects {expected}")]
    StateDimension { expected: usize, found: usize },
    #[error("network shapes differ: {0}")]
    ShapeMismatch(String),
    #[error("empty batch")]
    EmptyBatch,
    #[error("non-finite parameters after update {update}")]
    Diverged { update: u64 },
    #[error("policy checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
