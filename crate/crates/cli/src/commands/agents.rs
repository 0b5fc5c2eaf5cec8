use std::path::{Path, PathBuf};

use p2p_core::agents::{LearnerConfig, PolicyCheckpoint, StateMode, StateSpec};
use p2p_core::env::{steps_to_fraction, train_agents as run_training, Environment, LearnerSetup, TrainingConfig, TrainingOutcome};
use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv};
use crate::config::PolicyFamily;
use crate::manifest::write_manifest;
use crate::scenario::{environment, forecast_table, load_community};
use crate::{CliError, RunConfig};

/// Share of the final greedy reward used to time convergence.
pub const CONVERGENCE_FRACTION: f64 = 0.9;
/// Trailing window, in evaluation points, for smoothing the greedy curve.
pub const CONVERGENCE_WINDOW: usize = 3;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub family: String,
    pub total_steps: u64,
    /// Empty when the greedy curve has too few points.
    pub steps_to_90: Option<u64>,
    pub final_eval_reward: f64,
}

pub fn state_mode(cfg: &RunConfig, family: PolicyFamily) -> StateMode {
    match family {
        PolicyFamily::DqnForecast => cfg.agents.forecast_state,
        PolicyFamily::Dqn | PolicyFamily::RuleBased => StateMode::ForecastFree,
    }
}

/// Learner seeds depend on the run seed and agent index only, so the two
/// families train on paired seeds.
pub fn learner_setups(cfg: &RunConfig, env: &Environment, family: PolicyFamily) -> Vec<LearnerSetup> {
    let horizon = env.forecasts().horizon();
    (0..env.n_agents())
        .map(|i| LearnerSetup {
            config: LearnerConfig { seed: cfg.seed.wrapping_mul(1000).wrapping_add(i as u64), ..cfg.agents.learner.clone() },
            state: StateSpec::new(state_mode(cfg, family), horizon, env.energy_scale(i)),
        })
        .collect()
}

pub fn training_config(cfg: &RunConfig) -> TrainingConfig {
    TrainingConfig { seed: cfg.seed, ..cfg.agents.training.clone() }
}

pub fn train_family(cfg: &RunConfig, env: &Environment, family: PolicyFamily) -> Result<TrainingOutcome, CliError> {
    Ok(run_training(env, &learner_setups(cfg, env, family), &training_config(cfg))?)
}

fn final_eval_reward(outcome: &TrainingOutcome) -> f64 {
    let last = outcome.eval.last().map_or(0, |p| p.step);
    outcome.eval.iter().filter(|p| p.step == last).map(|p| p.reward).sum()
}

fn save_family(dir: &Path, env: &Environment, outcome: &TrainingOutcome, outputs: &mut Vec<String>, family: PolicyFamily) -> Result<(), CliError> {
    let sub = family.slug();
    ensure_dir(&dir.join(sub))?;
    for (i, (agent, spec)) in outcome.agents.iter().zip(&outcome.specs).enumerate() {
        let id = &env.agents()[i].id;
        let ckpt = PolicyCheckpoint::new(id, agent.config(), *spec, agent.steps(), agent.q());
        let name = format!("{sub}/{id}.json");
        ckpt.save(&dir.join(&name))?;
        outputs.push(name);
        let curve: Vec<_> = outcome.curve.iter().filter(|c| &c.agent == id).collect();
        let name = format!("{sub}/curve_{id}.csv");
        write_csv(&dir.join(&name), &curve)?;
        outputs.push(name);
    }
    let name = format!("{sub}/eval_curve.csv");
    write_csv(&dir.join(&name), &outcome.eval)?;
    outputs.push(name);
    Ok(())
}

pub fn train_agents(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = ensure_dir(&cfg.checkpoint_dir())?;
    let community = load_community(cfg)?;
    let env = environment(cfg, &community, forecast_table(cfg, &community)?)?;
    let mut outputs = Vec::new();
    let mut convergence = Vec::new();
    for &family in &cfg.agents.families {
        let outcome = train_family(cfg, &env, family)?;
        save_family(&dir, &env, &outcome, &mut outputs, family)?;
        convergence.push(ConvergenceRow {
            family: family.slug().into(),
            total_steps: cfg.agents.training.total_steps,
            steps_to_90: steps_to_fraction(&outcome.eval, CONVERGENCE_FRACTION, CONVERGENCE_WINDOW),
            final_eval_reward: final_eval_reward(&outcome),
        });
    }
    write_csv(&dir.join("convergence.csv"), &convergence)?;
    outputs.push("convergence.csv".into());
    write_manifest(&dir, "train-agents", cfg, &outputs)?;
    Ok(dir)
}
