use serde::{Deserialize, Serialize};

use super::KtuError;

/// Architecture and training hyperparameters of the probabilistic forecaster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KtuConfig {
    pub d_model: usize,
    pub n_layers: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub dropout: f64,
    /// Input window length in hours.
    pub window: usize,
    /// Forecast horizon in hours.
    pub horizon: usize,
    /// Weight of the temporal smoothness term.
    pub alpha_smooth: f64,
    /// Weight of the night-time PV penalty.
    pub beta_night: f64,
    /// Added to every variance.
    pub epsilon_stab: f64,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    /// Epochs without validation improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for KtuConfig {
    fn default() -> Self {
        Self {
            d_model: 16,
            n_layers: 2,
            n_heads: 4,
            d_ff: 64,
            dropout: 0.1,
            window: 24,
            horizon: 3,
            alpha_smooth: 0.01,
            beta_night: 0.1,
            epsilon_stab: 1e-6,
            learning_rate: 1e-3,
            batch_size: 32,
            max_epochs: 30,
            patience: 5,
            seed: 0,
        }
    }
}

impl KtuConfig {
    /// Full-size dimensions (128-wide model, 512-wide feedforward).
    pub fn full_scale() -> Self {
        Self { d_model: 128, d_ff: 512, ..Self::default() }
    }

    pub fn head_dim(&self) -> usize {
        self.d_model / self.n_heads
    }

    pub fn validate(&self) -> Result<(), KtuError> {
        let bad = |field: &'static str, reason: String| Err(KtuError::InvalidConfig { field, reason });
        if self.d_model == 0 || self.n_heads == 0 || !self.d_model.is_multiple_of(self.n_heads) {
            return bad("d_model", format!("{} must be a positive multiple of n_heads = {}", self.d_model, self.n_heads));
        }
        if self.n_layers == 0 {
            return bad("n_layers", "must be at least 1".into());
        }
        if self.d_ff == 0 {
            return bad("d_ff", "must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout", format!("{} not in [0, 1)", self.dropout));
        }
        if self.window == 0 || self.horizon == 0 {
            return bad("window", "window and horizon must be at least 1".into());
        }
        if !(self.alpha_smooth >= 0.0) || !(self.beta_night >= 0.0) {
            return bad("alpha_smooth", "regularisation weights must be non-negative".into());
        }
        if !(self.epsilon_stab > 0.0) {
            return bad("epsilon_stab", format!("{} must be positive", self.epsilon_stab));
        }
        if !(self.learning_rate >= 0.0) || !self.learning_rate.is_finite() {
            return bad("learning_rate", format!("{} must be finite and non-negative", self.learning_rate));
        }
        if self.batch_size == 0 {
            return bad("batch_size", "must be at least 1".into());
        }
        Ok(())
    }

    /// Checks that `other` describes the same network shape.
    pub fn check_compatible(&self, other: &KtuConfig) -> Result<(), KtuError> {
        let pairs = [
            ("d_model", self.d_model, other.d_model),
            ("n_layers", self.n_layers, other.n_layers),
            ("n_heads", self.n_heads, other.n_heads),
            ("d_ff", self.d_ff, other.d_ff),
            ("window", self.window, other.window),
            ("horizon", self.horizon, other.horizon),
        ];
        for (field, a, b) in pairs {
            if a != b {
                return Err(KtuError::ConfigMismatch { field, expected: b.to_string(), found: a.to_string() });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        KtuConfig::default().validate().unwrap();
        KtuConfig::full_scale().validate().unwrap();
    }

    #[test]
    fn invariants_are_enforced() {
        let cfg = KtuConfig { d_model: 10, n_heads: 4, ..KtuConfig::default() };
        assert!(matches!(cfg.validate(), Err(KtuError::InvalidConfig { field: "d_model", .. })));
        assert!(KtuConfig { dropout: 1.0, ..KtuConfig::default() }.validate().is_err());
        assert!(KtuConfig { epsilon_stab: 0.0, ..KtuConfig::default() }.validate().is_err());
    }
}
