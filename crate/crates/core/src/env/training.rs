use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{run_episode, EnvError, Environment, Policy, WorldState};
use crate::agents::{build_state, DqnAgent, LearnerConfig, StateSpec, Transition};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    /// Environment steps across all episodes.
    pub total_steps: u64,
    pub episode_hours: usize,
    /// Episodes start at day boundaries inside `train_start..train_end`.
    pub train_start: usize,
    pub train_end: usize,
    /// Greedy evaluation period in steps; 0 disables it.
    pub eval_every: u64,
    pub eval_start: usize,
    pub eval_hours: usize,
    pub seed: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        Self {
            total_steps: 50_000,
            episode_hours: 30 * 24,
            train_start: 48,
            train_end: 48 + 240 * 24,
            eval_every: 0,
            eval_start: 48 + 240 * 24,
            eval_hours: 30 * 24,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LearnerSetup {
    pub config: LearnerConfig,
    pub state: StateSpec,
}

/// One point of a training curve, written at the end of every episode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub step: u64,
    pub agent: String,
    pub epsilon: f64,
    /// Mean of `max_a Q(s, a)` over the episode.
    pub mean_q: f64,
    pub episode_reward: f64,
}

/// Greedy return on the fixed evaluation span.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalPoint {
    pub step: u64,
    pub agent: String,
    pub reward: f64,
}

#[derive(Debug, Clone)]
pub struct TrainingOutcome {
    pub agents: Vec<DqnAgent<f64>>,
    pub specs: Vec<StateSpec>,
    pub curve: Vec<CurvePoint>,
    pub eval: Vec<EvalPoint>,
}

impl TrainingOutcome {
    /// Frozen policies for evaluation.
    pub fn policies(&self, epsilon: f64, seed: u64) -> Vec<Policy> {
        dqn_policies(&self.agents, &self.specs, epsilon, seed)
    }
}

pub fn dqn_policies(agents: &[DqnAgent<f64>], specs: &[StateSpec], epsilon: f64, seed: u64) -> Vec<Policy> {
    agents
        .iter()
        .zip(specs)
        .enumerate()
        .map(|(i, (a, spec))| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            Policy::Dqn { q: a.q().clone(), spec: *spec, epsilon, rng }
        })
        .collect()
}

fn states(env: &Environment, world: &WorldState, specs: &[StateSpec]) -> Result<Vec<Vec<f64>>, EnvError> {
    (0..env.n_agents())
        .map(|i| Ok(build_state(&env.observe(world, i)?, Some(env.forecast(world, i)?), &specs[i])?.values))
        .collect()
}

fn evaluate(env: &Environment, agents: &[DqnAgent<f64>], specs: &[StateSpec], cfg: &TrainingConfig, step: u64, out: &mut Vec<EvalPoint>) -> Result<(), EnvError> {
    let mut policies = dqn_policies(agents, specs, 0.0, cfg.seed);
    let log = run_episode(env, cfg.eval_start, cfg.eval_hours, &mut policies)?;
    out.extend(log.totals.iter().map(|t| EvalPoint { step, agent: t.agent.clone(), reward: t.reward }));
    Ok(())
}

/// Trains one independent DQN learner per agent in the shared environment.
pub fn train_agents(env: &Environment, setups: &[LearnerSetup], cfg: &TrainingConfig) -> Result<TrainingOutcome, EnvError> {
    if setups.len() != env.n_agents() {
        return Err(EnvError::Misaligned(format!("{} learners for {} agents", setups.len(), env.n_agents())));
    }
    if cfg.episode_hours == 0 || cfg.train_end < cfg.train_start + cfg.episode_hours {
        return Err(EnvError::InvalidSpan(format!(
            "training range {}..{} cannot hold a {}-hour episode",
            cfg.train_start, cfg.train_end, cfg.episode_hours
        )));
    }
    env.check_span(cfg.train_start, cfg.train_end - cfg.train_start)?;
    if cfg.eval_every > 0 {
        env.check_span(cfg.eval_start, cfg.eval_hours)?;
    }
    let specs: Vec<StateSpec> = setups.iter().map(|s| s.state).collect();
    let mut agents = setups.iter().map(|s| DqnAgent::new(s.config.clone(), s.state.dim())).collect::<Result<Vec<_>, _>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let n_days = (cfg.train_end - cfg.train_start - cfg.episode_hours) / 24;
    let mut curve = Vec::new();
    let mut eval = Vec::new();
    if cfg.eval_every > 0 {
        evaluate(env, &agents, &specs, cfg, 0, &mut eval)?;
    }

    let mut steps = 0u64;
    while steps < cfg.total_steps {
        let start = cfg.train_start + 24 * rng.random_range(0..=n_days);
        let mut world = env.reset(start)?;
        let mut current = states(env, &world, &specs)?;
        let mut ep_reward = vec![0.0; agents.len()];
        let mut q_sum = vec![0.0; agents.len()];
        let mut n = 0usize;
        while n < cfg.episode_hours && steps < cfg.total_steps {
            let mut actions = Vec::with_capacity(agents.len());
            for (i, agent) in agents.iter_mut().enumerate() {
                let q = agent.q().q_values(&current[i])?;
                q_sum[i] += q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
                actions.push(agent.act_explore(&current[i])?);
            }
            let (next, result) = env.step(&world, &actions)?;
            let next_states = states(env, &next, &specs)?;
            for (i, agent) in agents.iter_mut().enumerate() {
                let r = result.agents[i].reward;
                ep_reward[i] += r;
                agent.observe(Transition {
                    state: std::mem::take(&mut current[i]),
                    action: actions[i].index(),
                    reward: r,
                    next_state: next_states[i].clone(),
                    terminal: false,
                })?;
            }
            world = next;
            current = next_states;
            steps += 1;
            n += 1;
            if cfg.eval_every > 0 && steps.is_multiple_of(cfg.eval_every) {
                evaluate(env, &agents, &specs, cfg, steps, &mut eval)?;
            }
        }
        for (i, agent) in agents.iter().enumerate() {
            curve.push(CurvePoint {
                step: steps,
                agent: env.agents()[i].id.clone(),
                epsilon: agent.epsilon(),
                mean_q: q_sum[i] / n as f64,
                episode_reward: ep_reward[i],
            });
        }
    }
    Ok(TrainingOutcome { agents, specs, curve, eval })
}

/// First evaluation step at which the smoothed greedy reward reaches
/// `fraction` of its final value. Rewards are summed over agents and
/// smoothed with a trailing mean of `window` points; the final value is the
/// last smoothed point. Meant for non-negative reward curves.
pub fn steps_to_fraction(eval: &[EvalPoint], fraction: f64, window: usize) -> Option<u64> {
    let mut by_step: Vec<(u64, f64)> = Vec::new();
    for p in eval {
        match by_step.last_mut() {
            Some((s, r)) if *s == p.step => *r += p.reward,
            _ => by_step.push((p.step, p.reward)),
        }
    }
    let w = window.max(1);
    if by_step.len() < w {
        return None;
    }
    let smooth: Vec<(u64, f64)> = (w - 1..by_step.len())
        .map(|j| (by_step[j].0, by_step[j + 1 - w..=j].iter().map(|x| x.1).sum::<f64>() / w as f64))
        .collect();
    let target = fraction * smooth.last()?.1;
    smooth.iter().find(|(_, r)| *r >= target).map(|(s, _)| *s)
}
