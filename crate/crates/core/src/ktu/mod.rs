//! Knowledge Transformer with Uncertainty: a small transformer encoder with
//! Gaussian mean/variance heads for load and PV, a daylight mask on the PV
//! mean, a regularised likelihood loss and interval/calibration tooling.

mod checkpoint;
mod config;
mod intervals;
mod loss;
mod metrics;
mod model;
mod toy;
mod train;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Scalar;

pub use checkpoint::{KtuCheckpoint, NamedTensor, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use config::KtuConfig;
pub use intervals::{predict_with_intervals, sample_interval, Interval, IntervalForecast};
pub use loss::{composite_loss, LossBreakdown};
pub use metrics::{crps_gaussian, mpiw, picp};
pub use model::{apply_pv_physics_mask, multi_head_attention, AttentionWeights, KtuModel, KtuParameters, RawHeads};
pub use toy::{toy_gaussian_dataset, toy_load_mean, toy_load_sigma};
pub use train::{evaluate, train, EpochLog, TrainingLog};

#[derive(Debug, Error)]
pub enum KtuError {
    #[error("invalid config field `{field}`: {reason}")]
    InvalidConfig { field: &'static str, reason: String },
    #[error("checkpoint config mismatch on `{field}`: expected {expected}, found {found}")]
    ConfigMismatch { field: &'static str, expected: String, found: String },
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-positive variance {value} at step {step}")]
    NonPositiveVariance { step: usize, value: f64 },
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
    #[error("empty dataset: {0}")]
    EmptyDataset(&'static str),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Per-step Gaussian forecast for load and PV over the horizon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct ForecastDistribution<T> {
    pub mu_load: Vec<T>,
    pub var_load: Vec<T>,
    pub mu_pv: Vec<T>,
    pub var_pv: Vec<T>,
}

impl<T: Scalar> ForecastDistribution<T> {
    pub fn horizon(&self) -> usize {
        self.mu_load.len()
    }

    /// Same mean for every step and a fixed variance.
    pub fn constant(horizon: usize, load: T, pv: T, variance: T) -> Self {
        Self {
            mu_load: vec![load; horizon],
            var_load: vec![variance; horizon],
            mu_pv: vec![pv; horizon],
            var_pv: vec![variance; horizon],
        }
    }

    pub fn sigma_load(&self) -> Vec<T> {
        self.var_load.iter().map(|v| v.sqrt()).collect()
    }

    pub fn sigma_pv(&self) -> Vec<T> {
        self.var_pv.iter().map(|v| v.sqrt()).collect()
    }

    /// All four series share one length, variances are positive and the PV
    /// mean is non-negative.
    pub fn validate(&self) -> Result<(), KtuError> {
        let h = self.horizon();
        if self.var_load.len() != h || self.mu_pv.len() != h || self.var_pv.len() != h {
            return Err(KtuError::Dimension("forecast series lengths differ".into()));
        }
        for (step, v) in self.var_load.iter().chain(&self.var_pv).enumerate() {
            if !(*v > T::zero()) {
                return Err(KtuError::NonPositiveVariance { step: step % h.max(1), value: v.f64() });
            }
        }
        if self.mu_pv.iter().chain(&self.mu_load).any(|m| !m.is_finite()) || self.mu_pv.iter().any(|m| *m < T::zero()) {
            return Err(KtuError::InvalidArgument("forecast means must be finite and PV non-negative".into()));
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ForecastDistribution<U> {
        let c = |v: &Vec<T>| v.iter().map(|x| U::of(x.f64())).collect();
        ForecastDistribution { mu_load: c(&self.mu_load), var_load: c(&self.var_load), mu_pv: c(&self.mu_pv), var_pv: c(&self.var_pv) }
    }
}
