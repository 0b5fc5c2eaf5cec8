use std::cmp::Ordering;
use std::fs;
use std::path::PathBuf;

use p2p_core::ktu::{self, KtuConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv};
use crate::config::{Bounds, SearchConfig};
use crate::manifest::write_manifest;
use crate::scenario::{forecast_data, load_community};
use crate::{CliError, RunConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRow {
    pub trial: usize,
    pub rank: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub d_model: usize,
    pub n_heads: usize,
    pub d_ff: usize,
    pub dropout: f64,
    pub alpha_smooth: f64,
    pub beta_night: f64,
    /// Validation total loss of the best epoch; infinite if training diverged.
    pub val_total: f64,
    pub val_nll: f64,
}

fn check_space(s: &SearchConfig) -> Result<(), CliError> {
    let bad = |f: &str, r: &str| Err(CliError::Validation(format!("search.{f}: {r}")));
    for (name, b) in [("learning_rate", s.learning_rate), ("dropout", s.dropout), ("alpha_smooth", s.alpha_smooth), ("beta_night", s.beta_night)] {
        if !(b.min <= b.max) || !b.min.is_finite() || !b.max.is_finite() {
            return bad(name, "empty range");
        }
    }
    if !(s.learning_rate.min > 0.0) {
        return bad("learning_rate", "must be positive");
    }
    for (name, list) in [("batch_size", &s.batch_size), ("d_model", &s.d_model), ("n_heads", &s.n_heads), ("d_ff", &s.d_ff)] {
        if list.is_empty() || list.contains(&0) {
            return bad(name, "needs at least one positive value");
        }
    }
    for d in &s.d_model {
        if !s.n_heads.iter().any(|h| d % h == 0) {
            return bad("n_heads", &format!("no head count divides d_model {d}"));
        }
    }
    if s.max_epochs == 0 {
        return bad("max_epochs", "must be positive");
    }
    Ok(())
}

fn uniform(rng: &mut ChaCha8Rng, b: Bounds) -> f64 {
    if b.min == b.max {
        b.min
    } else {
        rng.random_range(b.min..b.max)
    }
}

fn log_uniform(rng: &mut ChaCha8Rng, b: Bounds) -> f64 {
    if b.min == b.max {
        b.min
    } else {
        rng.random_range(b.min.ln()..b.max.ln()).exp()
    }
}

fn pick(rng: &mut ChaCha8Rng, xs: &[usize]) -> usize {
    xs[rng.random_range(0..xs.len())]
}

/// Draws one forecaster config from the search space.
pub fn sample_config(base: &KtuConfig, s: &SearchConfig, rng: &mut ChaCha8Rng) -> KtuConfig {
    let learning_rate = log_uniform(rng, s.learning_rate);
    let batch_size = pick(rng, &s.batch_size);
    let d_model = pick(rng, &s.d_model);
    let heads: Vec<usize> = s.n_heads.iter().copied().filter(|h| d_model.is_multiple_of(*h)).collect();
    let n_heads = pick(rng, &heads);
    let d_ff = pick(rng, &s.d_ff);
    KtuConfig {
        learning_rate,
        batch_size,
        d_model,
        n_heads,
        d_ff,
        dropout: uniform(rng, s.dropout),
        alpha_smooth: uniform(rng, s.alpha_smooth),
        beta_night: uniform(rng, s.beta_night),
        max_epochs: s.max_epochs,
        ..base.clone()
    }
}

pub fn hp_search(cfg: &RunConfig, trials: Option<usize>) -> Result<PathBuf, CliError> {
    let trials = trials.unwrap_or(cfg.search.trials);
    if trials == 0 {
        return Err(CliError::Validation("search.trials: must be at least 1".into()));
    }
    check_space(&cfg.search)?;
    let dir = ensure_dir(&cfg.out_dir.join("hp-search"))?;
    let community = load_community(cfg)?;
    let (splits, _) = forecast_data(cfg, &community)?;
    let base = KtuConfig { seed: cfg.seed, ..cfg.forecaster.model.clone() };
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut rows = Vec::with_capacity(trials);
    let mut configs = Vec::with_capacity(trials);
    for trial in 0..trials {
        let c = sample_config(&base, &cfg.search, &mut rng);
        c.validate().map_err(|e| CliError::Validation(format!("search space produced an invalid config: {e}")))?;
        let (val_total, val_nll) = match ktu::train(&splits.train, &splits.validation, &c) {
            Ok((model, _)) => {
                let l = ktu::evaluate(&model, &splits.validation)?;
                (l.total, l.nll)
            }
            Err(ktu::KtuError::Divergence { .. }) => (f64::INFINITY, f64::INFINITY),
            Err(e) => return Err(e.into()),
        };
        rows.push(TrialRow {
            trial,
            rank: 0,
            learning_rate: c.learning_rate,
            batch_size: c.batch_size,
            d_model: c.d_model,
            n_heads: c.n_heads,
            d_ff: c.d_ff,
            dropout: c.dropout,
            alpha_smooth: c.alpha_smooth,
            beta_night: c.beta_night,
            val_total,
            val_nll,
        });
        configs.push(c);
    }
    let mut order: Vec<usize> = (0..trials).collect();
    order.sort_by(|&a, &b| rows[a].val_total.partial_cmp(&rows[b].val_total).unwrap_or(Ordering::Equal).then(a.cmp(&b)));
    for (rank, &i) in order.iter().enumerate() {
        rows[i].rank = rank + 1;
    }
    write_csv(&dir.join("trials.csv"), &rows)?;
    let best = &configs[order[0]];
    fs::write(dir.join("best.toml"), toml::to_string(best).map_err(|e| CliError::Runtime(e.to_string()))?)?;
    write_manifest(&dir, "hp-search", cfg, &["trials.csv".into(), "best.toml".into()])?;
    Ok(dir)
}
