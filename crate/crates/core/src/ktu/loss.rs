//! Likelihood loss with smoothness and night-PV regularisers.

use serde::{Deserialize, Serialize};

use super::{ForecastDistribution, KtuConfig, KtuError, RawHeads};
use crate::linalg::Matrix;
use crate::profiles::HorizonExo;
use crate::{sigmoid, softplus, Scalar};

/// Batch-averaged loss components.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct LossBreakdown<T> {
    pub nll: T,
    pub smoothness: T,
    pub night_pv_penalty: T,
    pub total: T,
}

impl<T: Scalar> LossBreakdown<T> {
    pub fn from_parts(nll: T, smoothness: T, night_pv_penalty: T, cfg: &KtuConfig) -> Self {
        let total = nll + T::of(cfg.alpha_smooth) * smoothness + T::of(cfg.beta_night) * night_pv_penalty;
        Self { nll, smoothness, night_pv_penalty, total }
    }
}

fn gaussian_nll<T: Scalar>(mu: &[T], var: &[T], y: impl Iterator<Item = T>, eps: T) -> T {
    mu.iter().zip(var).zip(y).map(|((&m, &v), y)| (v + eps).ln() + (y - m) * (y - m) / (v + eps)).sum::<T>() * T::half()
}

fn total_variation<T: Scalar>(xs: &[T]) -> T {
    xs.windows(2).map(|w| (w[1] - w[0]).abs()).sum()
}

/// Loss over a batch. `pre_mask_pv` is `softplus(μ_P raw)` before the daylight
/// mask; `targets` are `horizon × 2` (load, PV); `daylight` holds the 0/1
/// flags per step. Every component is averaged over the batch.
pub fn composite_loss<T: Scalar>(
    pred: &[ForecastDistribution<T>],
    pre_mask_pv: &[Vec<T>],
    targets: &[Matrix<T>],
    daylight: &[Vec<T>],
    cfg: &KtuConfig,
) -> Result<LossBreakdown<T>, KtuError> {
    let n = pred.len();
    if n == 0 {
        return Err(KtuError::EmptyDataset("loss batch"));
    }
    if pre_mask_pv.len() != n || targets.len() != n || daylight.len() != n {
        return Err(KtuError::Dimension(format!(
            "batch sizes differ: {n} predictions, {} pre-mask, {} targets, {} daylight",
            pre_mask_pv.len(),
            targets.len(),
            daylight.len()
        )));
    }
    let eps = T::of(cfg.epsilon_stab);
    let (mut nll, mut smooth, mut night) = (T::zero(), T::zero(), T::zero());
    for (((p, pre), y), flags) in pred.iter().zip(pre_mask_pv).zip(targets).zip(daylight) {
        let h = p.horizon();
        if y.shape() != (h, 2) || pre.len() != h || flags.len() != h {
            return Err(KtuError::Dimension(format!("sample horizon {h} does not match its targets or flags")));
        }
        p.validate()?;
        nll += gaussian_nll(&p.mu_load, &p.var_load, (0..h).map(|k| y[(k, 0)]), eps);
        nll += gaussian_nll(&p.mu_pv, &p.var_pv, (0..h).map(|k| y[(k, 1)]), eps);
        smooth += total_variation(&p.mu_load) + total_variation(&p.mu_pv);
        night += pre.iter().zip(flags).map(|(&v, &f)| v * (T::one() - f)).sum::<T>();
    }
    let inv = T::one() / T::of(n as f64);
    Ok(LossBreakdown::from_parts(nll * inv, smooth * inv, night * inv, cfg))
}

fn sign<T: Scalar>(x: T) -> T {
    if x > T::zero() {
        T::one()
    } else if x < T::zero() {
        -T::one()
    } else {
        T::zero()
    }
}

/// Adds `d|μ_{k+1} − μ_k| / dμ` scaled by `w` into `grad`.
fn tv_grad<T: Scalar>(mu: &[T], w: T, grad: &mut [T]) {
    for k in 0..mu.len().saturating_sub(1) {
        let s = sign(mu[k + 1] - mu[k]) * w;
        grad[k + 1] += s;
        grad[k] -= s;
    }
}

/// One sample's loss components (unweighted) and the gradient of
/// `weight · total` with respect to the raw head outputs.
pub(crate) fn sample_loss_grad<T: Scalar>(
    raw: &RawHeads<T>,
    exo: &HorizonExo<T>,
    target: &Matrix<T>,
    cfg: &KtuConfig,
    weight: T,
) -> (LossBreakdown<T>, RawHeads<T>) {
    let eps = T::of(cfg.epsilon_stab);
    let alpha = T::of(cfg.alpha_smooth);
    let beta = T::of(cfg.beta_night);
    let h = raw.mu_load.len();
    let (dist, pre) = raw.activate(exo, eps);

    let mut g = RawHeads { mu_load: vec![T::zero(); h], var_load: vec![T::zero(); h], mu_pv: vec![T::zero(); h], var_pv: vec![T::zero(); h] };
    let mut nll = T::zero();
    // gradients with respect to the activated PV mean, chained below
    let mut g_mu_pv = vec![T::zero(); h];
    for k in 0..h {
        for (col, mu, var, raw_var, g_mu, g_var) in [
            (0, dist.mu_load[k], dist.var_load[k], raw.var_load[k], &mut g.mu_load[k], &mut g.var_load[k]),
            (1, dist.mu_pv[k], dist.var_pv[k], raw.var_pv[k], &mut g_mu_pv[k], &mut g.var_pv[k]),
        ] {
            let s = var + eps;
            let r = target[(k, col)] - mu;
            nll += T::half() * (s.ln() + r * r / s);
            *g_mu += weight * (-r / s);
            *g_var += weight * T::half() * (T::one() / s - r * r / (s * s)) * sigmoid(raw_var);
        }
    }
    let smooth = total_variation(&dist.mu_load) + total_variation(&dist.mu_pv);
    tv_grad(&dist.mu_load, weight * alpha, &mut g.mu_load);
    tv_grad(&dist.mu_pv, weight * alpha, &mut g_mu_pv);

    let mut night = T::zero();
    for k in 0..h {
        let f = exo.daylight_flag[k];
        let sg = sigmoid(raw.mu_pv[k]);
        night += pre[k] * (T::one() - f);
        g.mu_pv[k] = g_mu_pv[k] * sg * f * exo.norm_daylight[k] + weight * beta * (T::one() - f) * sg;
    }
    debug_assert!(pre.iter().zip(&raw.mu_pv).all(|(&p, &r)| p == softplus(r)));
    (LossBreakdown::from_parts(nll, smooth, night, cfg), g)
}
