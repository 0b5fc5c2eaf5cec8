//! Minibatch training with early stopping.

use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::loss::sample_loss_grad;
use super::model::raw_from_tape;
use super::{composite_loss, KtuConfig, KtuError, KtuModel, LossBreakdown};
use crate::autodiff::Tape;
use crate::linalg::Matrix;
use crate::optim::Optimizer;
use crate::profiles::{Sample, WindowedDataset};
use crate::Scalar;

/// One row of the training log. Everything except `train_nll` is measured on
/// the validation split in evaluation mode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_nll: f64,
    pub val_nll: f64,
    pub smoothness: f64,
    pub night_penalty: f64,
    pub total: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub epochs: Vec<EpochLog>,
    /// Epoch whose parameters were kept (0 means the initialisation).
    pub best_epoch: usize,
    pub stopped_early: bool,
}

impl TrainingLog {
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), KtuError> {
        let mut w = csv::Writer::from_writer(writer);
        for e in &self.epochs {
            w.serialize(e).map_err(|e| KtuError::Io(e.into()))?;
        }
        w.flush()?;
        Ok(())
    }
}

impl<T: Scalar> KtuModel<T> {
    fn batch_gradients(
        &self,
        samples: &[&Sample<T>],
        mut rng: Option<&mut ChaCha8Rng>,
    ) -> Result<(LossBreakdown<T>, Vec<Matrix<T>>), KtuError> {
        if samples.is_empty() {
            return Err(KtuError::EmptyDataset("gradient batch"));
        }
        let cfg = self.config();
        let weight = T::one() / T::of(samples.len() as f64);
        let tensors = &self.parameters().tensors;
        let mut grads: Vec<Matrix<T>> = tensors.iter().map(|m| Matrix::zeros(m.rows(), m.cols())).collect();
        let mut sum = LossBreakdown::default();
        for s in samples {
            self.check_input(&s.input, &s.exo)?;
            let mut tape = Tape::new(tensors);
            let heads = self.record(&mut tape, &s.input, rng.as_deref_mut());
            let raw = raw_from_tape(&tape, &heads);
            let (loss, g) = sample_loss_grad(&raw, &s.exo, &s.target, cfg, weight);
            let row = |v: Vec<T>| Matrix::row_vector(v);
            let seeds = [
                (heads.mu_load, row(g.mu_load)),
                (heads.var_load, row(g.var_load)),
                (heads.mu_pv, row(g.mu_pv)),
                (heads.var_pv, row(g.var_pv)),
            ];
            for (acc, g) in grads.iter_mut().zip(tape.backward(&seeds)) {
                acc.add_assign(&g);
            }
            sum.nll += loss.nll * weight;
            sum.smoothness += loss.smoothness * weight;
            sum.night_pv_penalty += loss.night_pv_penalty * weight;
        }
        Ok((LossBreakdown::from_parts(sum.nll, sum.smoothness, sum.night_pv_penalty, cfg), grads))
    }

    /// Batch loss and its gradient with respect to every parameter tensor,
    /// evaluation mode (no dropout).
    pub fn loss_and_gradients(&self, samples: &[&Sample<T>]) -> Result<(LossBreakdown<T>, Vec<Matrix<T>>), KtuError> {
        self.batch_gradients(samples, None)
    }
}

/// Evaluation-mode loss over a whole dataset.
pub fn evaluate<T: Scalar>(model: &KtuModel<T>, dataset: &WindowedDataset<T>) -> Result<LossBreakdown<T>, KtuError> {
    if dataset.samples.is_empty() {
        return Err(KtuError::EmptyDataset("evaluation set"));
    }
    let mut preds = Vec::with_capacity(dataset.samples.len());
    let mut pre = Vec::with_capacity(dataset.samples.len());
    for s in &dataset.samples {
        let raw = model.forward_raw(&s.input, &s.exo)?;
        let (d, p) = raw.activate(&s.exo, T::of(model.config().epsilon_stab));
        preds.push(d);
        pre.push(p);
    }
    let targets: Vec<Matrix<T>> = dataset.samples.iter().map(|s| s.target.clone()).collect();
    let flags: Vec<Vec<T>> = dataset.samples.iter().map(|s| s.exo.daylight_flag.clone()).collect();
    composite_loss(&preds, &pre, &targets, &flags, model.config())
}

fn finite_or<T: Scalar>(loss: &LossBreakdown<T>, epoch: usize, what: &str) -> Result<(), KtuError> {
    if [loss.nll, loss.smoothness, loss.night_pv_penalty, loss.total].iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(KtuError::Divergence { epoch, reason: format!("{what} loss is not finite (total {})", loss.total) })
    }
}

/// Trains a fresh model with Adam on the composite loss, shuffling with
/// `cfg.seed`, and keeps the parameters with the lowest validation total.
/// Stops after `cfg.patience` epochs without improvement.
pub fn train<T: Scalar>(
    train_set: &WindowedDataset<T>,
    validation: &WindowedDataset<T>,
    cfg: &KtuConfig,
) -> Result<(KtuModel<T>, TrainingLog), KtuError> {
    cfg.validate()?;
    let first = train_set.samples.first().ok_or(KtuError::EmptyDataset("training set"))?;
    if validation.samples.is_empty() {
        return Err(KtuError::EmptyDataset("validation set"));
    }
    let mut model = KtuModel::new(cfg.clone(), first.input.cols())?;
    let mut optimizer = Optimizer::adam(cfg.learning_rate, &model.parameters().tensors);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed.wrapping_add(1));

    let initial = evaluate(&model, validation)?;
    finite_or(&initial, 0, "initial validation")?;
    let mut best = (initial.total, 0usize, model.parameters().clone());
    let mut log = TrainingLog { epochs: Vec::new(), best_epoch: 0, stopped_early: false };
    let mut order: Vec<usize> = (0..train_set.samples.len()).collect();
    let mut stale = 0;

    for epoch in 1..=cfg.max_epochs {
        order.shuffle(&mut rng);
        let mut train_nll = 0.0;
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&Sample<T>> = chunk.iter().map(|&i| &train_set.samples[i]).collect();
            let (loss, grads) = model.batch_gradients(&batch, Some(&mut rng))?;
            finite_or(&loss, epoch, "training")?;
            train_nll += loss.nll.f64() * chunk.len() as f64;
            optimizer.step(&mut model.parameters_mut().tensors, &grads);
            if !model.parameters().is_finite() {
                return Err(KtuError::Divergence { epoch, reason: "non-finite parameters after an update".into() });
            }
        }
        let val = evaluate(&model, validation)?;
        finite_or(&val, epoch, "validation")?;
        log.epochs.push(EpochLog {
            epoch,
            train_nll: train_nll / order.len() as f64,
            val_nll: val.nll.f64(),
            smoothness: val.smoothness.f64(),
            night_penalty: val.night_pv_penalty.f64(),
            total: val.total.f64(),
        });
        if val.total < best.0 {
            best = (val.total, epoch, model.parameters().clone());
            stale = 0;
        } else {
            stale += 1;
            if stale >= cfg.patience {
                log.stopped_early = true;
                break;
            }
        }
    }
    log.best_epoch = best.1;
    *model.parameters_mut() = best.2;
    Ok((model, log))
}
