use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::EnvError;
use crate::agents::{build_state, rule_based_policy, select_action, QNetwork, StateSpec};
use crate::ktu::ForecastDistribution;
use crate::rewards::{AgentAction, AgentObservation, N_ACTIONS};

/// Decision rule for one agent during evaluation.
#[derive(Debug, Clone)]
pub enum Policy {
    RuleBased,
    /// Uniform over the eight actions.
    Random(ChaCha8Rng),
    Fixed(AgentAction),
    /// Trained network, epsilon-greedy with its own stream.
    Dqn { q: QNetwork<f64>, spec: StateSpec, epsilon: f64, rng: ChaCha8Rng },
}

impl Policy {
    pub fn act(&mut self, obs: &AgentObservation<f64>, forecast: &ForecastDistribution<f64>) -> Result<AgentAction, EnvError> {
        Ok(match self {
            Policy::RuleBased => rule_based_policy(obs),
            Policy::Random(rng) => AgentAction::ALL[rng.random_range(0..N_ACTIONS)],
            Policy::Fixed(a) => *a,
            Policy::Dqn { q, spec, epsilon, rng } => {
                let state = build_state(obs, Some(forecast), spec)?;
                select_action(q, &state.values, *epsilon, rng)?
            }
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Policy::RuleBased => "rule_based",
            Policy::Random(_) => "random",
            Policy::Fixed(_) => "fixed",
            Policy::Dqn { .. } => "dqn",
        }
    }
}
