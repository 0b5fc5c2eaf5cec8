use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::qnet::argmax;
use super::{AgentError, QNetwork, ReplayBuffer, Transition};
use crate::autodiff::Tape;
use crate::linalg::Matrix;
use crate::optim::{Optimizer, OptimizerKind};
use crate::rewards::{AgentAction, N_ACTIONS};
use crate::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LearnerConfig {
    pub gamma: f64,
    pub learning_rate: f64,
    pub optimizer: OptimizerKind,
    pub buffer_capacity: usize,
    pub batch_size: usize,
    /// Environment steps between target-network copies.
    pub target_sync_period: u64,
    pub epsilon_start: f64,
    pub epsilon_end: f64,
    pub epsilon_decay_steps: u64,
    /// Width of both hidden layers.
    pub hidden: usize,
    /// Transitions collected before the first update.
    pub learning_starts: usize,
    /// Environment steps per gradient update.
    pub train_every: u64,
    pub seed: u64,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            learning_rate: 1e-3,
            optimizer: OptimizerKind::Adam,
            buffer_capacity: 50_000,
            batch_size: 64,
            target_sync_period: 1_000,
            epsilon_start: 1.0,
            epsilon_end: 0.05,
            epsilon_decay_steps: 100_000,
            hidden: 64,
            learning_starts: 1_000,
            train_every: 1,
            seed: 0,
        }
    }
}

impl LearnerConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |field: &'static str, reason: String| Err(AgentError::InvalidConfig { field, reason });
        if !(0.0..1.0).contains(&self.gamma) {
            return bad("gamma", format!("{} not in [0, 1)", self.gamma));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", format!("{} must be finite and non-negative", self.learning_rate));
        }
        if self.buffer_capacity == 0 || self.batch_size == 0 || self.hidden == 0 || self.train_every == 0 {
            return bad("buffer_capacity", "capacity, batch size, hidden width and train_every must be positive".into());
        }
        if self.target_sync_period == 0 {
            return bad("target_sync_period", "must be positive".into());
        }
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        if !unit(self.epsilon_start) || !unit(self.epsilon_end) || self.epsilon_end > self.epsilon_start {
            return bad("epsilon_end", format!("need 0 <= end ({}) <= start ({}) <= 1", self.epsilon_end, self.epsilon_start));
        }
        Ok(())
    }
}

/// Linear decay from `epsilon_start` to `epsilon_end` over
/// `epsilon_decay_steps`, constant afterwards.
pub fn epsilon_at(cfg: &LearnerConfig, step: u64) -> f64 {
    if cfg.epsilon_decay_steps == 0 || step >= cfg.epsilon_decay_steps {
        return cfg.epsilon_end;
    }
    let frac = step as f64 / cfg.epsilon_decay_steps as f64;
    cfg.epsilon_start + (cfg.epsilon_end - cfg.epsilon_start) * frac
}

/// Uniform action with probability `epsilon`, otherwise the greedy one.
pub fn select_action<T: Scalar, R: Rng + ?Sized>(q: &QNetwork<T>, state: &[T], epsilon: f64, rng: &mut R) -> Result<AgentAction, AgentError> {
    if rng.random::<f64>() < epsilon {
        return Ok(AgentAction::ALL[rng.random_range(0..N_ACTIONS)]);
    }
    Ok(AgentAction::ALL[argmax(&q.q_values(state)?)])
}

/// One gradient step on `½ mean (y − q(s, a))²` with
/// `y = r + γ max_a' q_target(s', a')` (`y = r` when terminal). Returns the
/// loss before the step.
pub fn td_update<T: Scalar>(
    q: &mut QNetwork<T>,
    target: &QNetwork<T>,
    batch: &[&Transition<T>],
    gamma: f64,
    optimizer: &mut Optimizer<T>,
) -> Result<T, AgentError> {
    if batch.is_empty() {
        return Err(AgentError::EmptyBatch);
    }
    let n = batch.len();
    let next: Vec<&[T]> = batch.iter().map(|t| t.next_state.as_slice()).collect();
    let next_q = target.q_batch(&next)?;
    let dim = q.state_dim();
    let mut states = Vec::with_capacity(n * dim);
    for t in batch {
        if t.state.len() != dim {
            return Err(AgentError::StateDimension { expected: dim, found: t.state.len() });
        }
        if t.action >= N_ACTIONS {
            return Err(AgentError::ShapeMismatch(format!("action index {}", t.action)));
        }
        states.extend_from_slice(&t.state);
    }
    let tensors = q.tensors.clone();
    let mut tape = Tape::new(&tensors);
    let out = q.record(&mut tape, Matrix::from_vec(n, dim, states));
    let values = tape.value(out);
    let inv_n = T::one() / T::of(n as f64);
    let mut seed = Matrix::zeros(n, N_ACTIONS);
    let mut loss = T::zero();
    for (i, t) in batch.iter().enumerate() {
        let bootstrap = if t.terminal {
            T::zero()
        } else {
            T::of(gamma) * next_q.row(i).iter().copied().fold(T::neg_infinity(), T::max)
        };
        let err = values[(i, t.action)] - (t.reward + bootstrap);
        loss += T::half() * err * err * inv_n;
        seed[(i, t.action)] = err * inv_n;
    }
    let grads = tape.backward(&[(out, seed)]);
    optimizer.step(&mut q.tensors, &grads);
    Ok(loss)
}

/// One independent learner: online and target networks, replay and
/// exploration state.
#[derive(Debug, Clone)]
pub struct DqnAgent<T: Scalar> {
    config: LearnerConfig,
    q: QNetwork<T>,
    target: QNetwork<T>,
    optimizer: Optimizer<T>,
    buffer: ReplayBuffer<T>,
    rng: ChaCha8Rng,
    steps: u64,
    updates: u64,
    last_loss: Option<T>,
}

impl<T: Scalar> DqnAgent<T> {
    pub fn new(config: LearnerConfig, state_dim: usize) -> Result<Self, AgentError> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let q = QNetwork::new(state_dim, config.hidden, &mut rng);
        Self::from_network(config, q, rng)
    }

    pub fn with_network(config: LearnerConfig, q: QNetwork<T>) -> Result<Self, AgentError> {
        config.validate()?;
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        Self::from_network(config, q, rng)
    }

    fn from_network(config: LearnerConfig, q: QNetwork<T>, mut rng: ChaCha8Rng) -> Result<Self, AgentError> {
        if q.hidden() != config.hidden {
            return Err(AgentError::ShapeMismatch(format!("network width {} vs config {}", q.hidden(), config.hidden)));
        }
        // decouple the exploration stream from initialisation
        rng.set_stream(1);
        Ok(Self {
            optimizer: Optimizer::new(config.optimizer, config.learning_rate, &q.tensors),
            target: q.clone(),
            q,
            buffer: ReplayBuffer::new(config.buffer_capacity),
            rng,
            steps: 0,
            updates: 0,
            last_loss: None,
            config,
        })
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn q(&self) -> &QNetwork<T> {
        &self.q
    }

    pub fn target(&self) -> &QNetwork<T> {
        &self.target
    }

    pub fn steps(&self) -> u64 {
        self.steps
    }

    pub fn updates(&self) -> u64 {
        self.updates
    }

    pub fn last_loss(&self) -> Option<T> {
        self.last_loss
    }

    pub fn buffer(&self) -> &ReplayBuffer<T> {
        &self.buffer
    }

    /// Exploration rate for the next environment step.
    pub fn epsilon(&self) -> f64 {
        epsilon_at(&self.config, self.steps)
    }

    pub fn act(&mut self, state: &[T], epsilon: f64) -> Result<AgentAction, AgentError> {
        select_action(&self.q, state, epsilon, &mut self.rng)
    }

    pub fn act_explore(&mut self, state: &[T]) -> Result<AgentAction, AgentError> {
        let eps = self.epsilon();
        self.act(state, eps)
    }

    /// Copies the online network into the target network.
    pub fn sync_target(&mut self) -> Result<(), AgentError> {
        self.target.copy_from(&self.q)
    }

    /// Stores a transition, counts one environment step, trains when due and
    /// syncs the target every `target_sync_period` steps.
    pub fn observe(&mut self, transition: Transition<T>) -> Result<(), AgentError> {
        self.buffer.push(transition);
        self.steps += 1;
        let cfg = &self.config;
        if self.buffer.len() >= cfg.learning_starts.max(1) && self.steps.is_multiple_of(cfg.train_every) {
            let batch = self.buffer.sample(cfg.batch_size, &mut self.rng);
            let loss = td_update(&mut self.q, &self.target, &batch, cfg.gamma, &mut self.optimizer)?;
            self.updates += 1;
            self.last_loss = Some(loss);
            if !self.q.is_finite() || !loss.is_finite() {
                return Err(AgentError::Diverged { update: self.updates });
            }
        }
        if self.steps.is_multiple_of(self.config.target_sync_period) {
            self.sync_target()?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn epsilon_schedule() {
        let cfg = LearnerConfig { epsilon_start: 1.0, epsilon_end: 0.1, epsilon_decay_steps: 10, ..LearnerConfig::default() };
        assert_eq!(epsilon_at(&cfg, 0), 1.0);
        assert!((epsilon_at(&cfg, 5) - 0.55).abs() < 1e-12);
        assert_eq!(epsilon_at(&cfg, 10), 0.1);
        assert_eq!(epsilon_at(&cfg, 1_000), 0.1);
        let mut prev = f64::INFINITY;
        for s in 0..20 {
            let e = epsilon_at(&cfg, s);
            assert!(e <= prev);
            prev = e;
        }
    }

    #[test]
    fn config_validation() {
        LearnerConfig::default().validate().unwrap();
        assert!(LearnerConfig { gamma: 1.0, ..LearnerConfig::default() }.validate().is_err());
        assert!(LearnerConfig { epsilon_end: 0.5, epsilon_start: 0.2, ..LearnerConfig::default() }.validate().is_err());
        assert!(LearnerConfig { batch_size: 0, ..LearnerConfig::default() }.validate().is_err());
    }
}
