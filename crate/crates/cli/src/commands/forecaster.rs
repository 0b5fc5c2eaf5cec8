use std::fs::File;
use std::io::BufWriter;
use std::path::PathBuf;

use p2p_core::ktu::{self, crps_gaussian, mpiw, picp, predict_with_intervals, Interval, KtuCheckpoint, KtuModel};
use p2p_core::profiles::WindowedDataset;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{ensure_dir, write_csv};
use crate::manifest::write_manifest;
use crate::scenario::{forecast_data, load_community};
use crate::{CliError, RunConfig};

/// Held-out forecast quality for one split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub split: String,
    pub samples: usize,
    pub nll: f64,
    pub total_loss: f64,
    pub picp_load: f64,
    pub picp_pv: f64,
    pub mpiw_load: f64,
    pub mpiw_pv: f64,
    pub crps_load: f64,
    pub crps_pv: f64,
}

fn split_metrics(cfg: &RunConfig, model: &KtuModel<f64>, name: &str, data: &WindowedDataset<f64>, seed: u64) -> Result<MetricsRow, CliError> {
    let loss = ktu::evaluate(model, data)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut load_iv, mut pv_iv): (Vec<Interval<f64>>, Vec<Interval<f64>>) = (Vec::new(), Vec::new());
    let (mut load_y, mut pv_y) = (Vec::new(), Vec::new());
    let (mut crps_load, mut crps_pv) = (0.0, 0.0);
    for s in &data.samples {
        let iv = predict_with_intervals(model, &s.input, &s.exo, cfg.forecaster.interval_samples, cfg.forecaster.interval_level, &mut rng)?;
        let f = model.forward(&s.input, &s.exo)?;
        let (yl, yp) = (s.target_load(), s.target_pv());
        for k in 0..f.horizon() {
            crps_load += crps_gaussian(f.mu_load[k], f.var_load[k].sqrt(), yl[k])?;
            crps_pv += crps_gaussian(f.mu_pv[k], f.var_pv[k].sqrt(), yp[k])?;
        }
        load_iv.extend(iv.load);
        pv_iv.extend(iv.pv);
        load_y.extend(yl);
        pv_y.extend(yp);
    }
    let n = load_y.len() as f64;
    Ok(MetricsRow {
        split: name.into(),
        samples: data.len(),
        nll: loss.nll,
        total_loss: loss.total,
        picp_load: picp(&load_iv, &load_y)?,
        picp_pv: picp(&pv_iv, &pv_y)?,
        mpiw_load: mpiw(&load_iv)?,
        mpiw_pv: mpiw(&pv_iv)?,
        crps_load: crps_load / n,
        crps_pv: crps_pv / n,
    })
}

pub fn train_forecaster(cfg: &RunConfig) -> Result<PathBuf, CliError> {
    let dir = ensure_dir(&cfg.out_dir.join("forecaster"))?;
    let community = load_community(cfg)?;
    let (splits, encoder) = forecast_data(cfg, &community)?;
    let model_cfg = ktu::KtuConfig { seed: cfg.seed, ..cfg.forecaster.model.clone() };
    let (model, log) = ktu::train(&splits.train, &splits.validation, &model_cfg)?;

    let mut ckpt = KtuCheckpoint::from_model(&model);
    ckpt.extra.insert("norm_stats".into(), serde_json::to_value(encoder.stats())?);
    ckpt.extra.insert("latitude".into(), serde_json::to_value(encoder.daylight().latitude())?);
    ckpt.extra.insert("n_lags".into(), serde_json::to_value(encoder.n_lags())?);
    ckpt.save(&dir.join("ktu.json"))?;
    log.write_csv(BufWriter::new(File::create(dir.join("training_log.csv"))?))?;

    let rows = vec![
        split_metrics(cfg, &model, "validation", &splits.validation, cfg.seed)?,
        split_metrics(cfg, &model, "test", &splits.test, cfg.seed)?,
    ];
    write_csv(&dir.join("metrics.csv"), &rows)?;
    write_manifest(&dir, "train-forecaster", cfg, &["ktu.json".into(), "training_log.csv".into(), "metrics.csv".into()])?;
    Ok(dir)
}
