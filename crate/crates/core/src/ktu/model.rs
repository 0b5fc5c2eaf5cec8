//! Parameter layout, attention and the forward pass.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::{ForecastDistribution, KtuConfig, KtuError};
use crate::autodiff::{Tape, Var};
use crate::linalg::Matrix;
use crate::profiles::HorizonExo;
use crate::{softplus, Scalar};

/// Named parameter tensors in a fixed order determined by the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct KtuParameters<T> {
    pub names: Vec<String>,
    pub tensors: Vec<Matrix<T>>,
}

impl<T: Scalar> KtuParameters<T> {
    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn count(&self) -> usize {
        self.tensors.iter().map(Matrix::len).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    pub fn get(&self, name: &str) -> Option<&Matrix<T>> {
        self.names.iter().position(|n| n == name).map(|i| &self.tensors[i])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Affine {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Norm {
    gamma: usize,
    beta: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Block {
    wq: usize,
    wk: usize,
    wv: usize,
    wo: usize,
    ln1: Norm,
    ff1: Affine,
    ff2: Affine,
    ln2: Norm,
}

#[derive(Debug, Clone, PartialEq)]
struct Layout {
    in1: Affine,
    in_ln1: Norm,
    in2: Affine,
    in_ln2: Norm,
    pos: usize,
    blocks: Vec<Block>,
    mu_load: Affine,
    var_load: Affine,
    mu_pv: Affine,
    var_pv: Affine,
}

enum Init {
    Xavier,
    Zeros,
    Ones,
    Small,
}

struct Builder<'r, T> {
    names: Vec<String>,
    tensors: Vec<Matrix<T>>,
    rng: &'r mut ChaCha8Rng,
}

impl<T: Scalar> Builder<'_, T> {
    fn push(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        let m = match init {
            Init::Zeros => Matrix::zeros(rows, cols),
            Init::Ones => Matrix::filled(rows, cols, T::one()),
            Init::Xavier => {
                let limit = (6.0 / (rows + cols) as f64).sqrt();
                let d = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
                Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| T::of(d.sample(self.rng))).collect())
            }
            Init::Small => {
                let d = Uniform::new_inclusive(-0.02, 0.02).expect("finite bounds");
                Matrix::from_vec(rows, cols, (0..rows * cols).map(|_| T::of(d.sample(self.rng))).collect())
            }
        };
        self.names.push(name);
        self.tensors.push(m);
        self.tensors.len() - 1
    }

    fn affine(&mut self, name: &str, fan_in: usize, fan_out: usize) -> Affine {
        let w = self.push(format!("{name}.weight"), fan_in, fan_out, Init::Xavier);
        let b = self.push(format!("{name}.bias"), 1, fan_out, Init::Zeros);
        Affine { w, b }
    }

    fn norm(&mut self, name: &str, width: usize) -> Norm {
        let gamma = self.push(format!("{name}.gamma"), 1, width, Init::Ones);
        let beta = self.push(format!("{name}.beta"), 1, width, Init::Zeros);
        Norm { gamma, beta }
    }
}

fn build_layout<T: Scalar>(cfg: &KtuConfig, feature_dim: usize, rng: &mut ChaCha8Rng) -> (Layout, KtuParameters<T>) {
    let d = cfg.d_model;
    let mut b = Builder { names: Vec::new(), tensors: Vec::new(), rng };
    let in1 = b.affine("input.0", feature_dim, d);
    let in_ln1 = b.norm("input.0.norm", d);
    let in2 = b.affine("input.1", d, d);
    let in_ln2 = b.norm("input.1.norm", d);
    let pos = b.push("positional".into(), cfg.window, d, Init::Small);
    let blocks = (0..cfg.n_layers)
        .map(|l| Block {
            wq: b.push(format!("layer{l}.attn.w_q"), d, d, Init::Xavier),
            wk: b.push(format!("layer{l}.attn.w_k"), d, d, Init::Xavier),
            wv: b.push(format!("layer{l}.attn.w_v"), d, d, Init::Xavier),
            wo: b.push(format!("layer{l}.attn.w_o"), d, d, Init::Xavier),
            ln1: b.norm(&format!("layer{l}.norm1"), d),
            ff1: b.affine(&format!("layer{l}.ff.0"), d, cfg.d_ff),
            ff2: b.affine(&format!("layer{l}.ff.1"), cfg.d_ff, d),
            ln2: b.norm(&format!("layer{l}.norm2"), d),
        })
        .collect();
    let h = cfg.horizon;
    let layout = Layout {
        in1,
        in_ln1,
        in2,
        in_ln2,
        pos,
        blocks,
        mu_load: b.affine("head.mu_load", d, h),
        var_load: b.affine("head.var_load", d, h),
        mu_pv: b.affine("head.mu_pv", d, h),
        var_pv: b.affine("head.var_pv", d, h),
    };
    (layout, KtuParameters { names: b.names, tensors: b.tensors })
}

/// Projection matrices of one self-attention layer, each `d_model × d_model`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionWeights<T> {
    pub w_q: Matrix<T>,
    pub w_k: Matrix<T>,
    pub w_v: Matrix<T>,
    pub w_o: Matrix<T>,
}

fn attention_on_tape<T: Scalar>(tape: &mut Tape<'_, T>, x: Var, w: [Var; 4], n_heads: usize) -> Var {
    let d = tape.value(x).cols();
    let dk = d / n_heads;
    let q = tape.matmul(x, w[0]);
    let k = tape.matmul(x, w[1]);
    let v = tape.matmul(x, w[2]);
    let scale = T::one() / T::of(dk as f64).sqrt();
    let heads: Vec<Var> = (0..n_heads)
        .map(|h| {
            let qh = tape.slice_cols(q, h * dk, dk);
            let kh = tape.slice_cols(k, h * dk, dk);
            let vh = tape.slice_cols(v, h * dk, dk);
            let scores = tape.matmul_t(qh, kh);
            let scores = tape.scale(scores, scale);
            let attn = tape.softmax_rows(scores);
            tape.matmul(attn, vh)
        })
        .collect();
    let cat = if heads.len() == 1 { heads[0] } else { tape.concat_cols(&heads) };
    tape.matmul(cat, w[3])
}

/// Self-attention `Concat(head_1..head_h)·W^O` with
/// `head_i = softmax(Q_i K_iᵀ / √d_k) V_i`, where `Q_i`, `K_i`, `V_i` are the
/// `i`-th `d_k`-wide column blocks of `x·W^Q`, `x·W^K`, `x·W^V`.
pub fn multi_head_attention<T: Scalar>(weights: &AttentionWeights<T>, x: &Matrix<T>, n_heads: usize) -> Result<Matrix<T>, KtuError> {
    let d = x.cols();
    if n_heads == 0 || !d.is_multiple_of(n_heads) {
        return Err(KtuError::Dimension(format!("width {d} not divisible into {n_heads} heads")));
    }
    for (name, m) in [("w_q", &weights.w_q), ("w_k", &weights.w_k), ("w_v", &weights.w_v), ("w_o", &weights.w_o)] {
        if m.shape() != (d, d) {
            return Err(KtuError::Dimension(format!("{name} is {:?}, expected ({d}, {d})", m.shape())));
        }
    }
    let params = [weights.w_q.clone(), weights.w_k.clone(), weights.w_v.clone(), weights.w_o.clone()];
    let mut tape = Tape::new(&params);
    let xv = tape.constant(x.clone());
    let w = [tape.param(0), tape.param(1), tape.param(2), tape.param(3)];
    let out = attention_on_tape(&mut tape, xv, w, n_heads);
    Ok(tape.value(out).clone())
}

/// `softplus(raw) · flag · norm`, elementwise.
pub fn apply_pv_physics_mask<T: Scalar>(mu_pv_raw: &[T], daylight_flag: &[T], norm_daylight: &[T]) -> Vec<T> {
    mu_pv_raw
        .iter()
        .zip(daylight_flag)
        .zip(norm_daylight)
        .map(|((&r, &f), &n)| softplus(r) * f * n)
        .collect()
}

/// Pre-activation head outputs for one sample, each of length `horizon`.
#[derive(Debug, Clone, PartialEq)]
pub struct RawHeads<T> {
    pub mu_load: Vec<T>,
    pub var_load: Vec<T>,
    pub mu_pv: Vec<T>,
    pub var_pv: Vec<T>,
}

impl<T: Scalar> RawHeads<T> {
    /// Applies the variance softplus and the PV mask. Also returns the
    /// unmasked `softplus(μ_P raw)`.
    pub fn activate(&self, exo: &HorizonExo<T>, epsilon_stab: T) -> (ForecastDistribution<T>, Vec<T>) {
        let var = |v: &[T]| v.iter().map(|&r| softplus(r) + epsilon_stab).collect();
        let pre_mask: Vec<T> = self.mu_pv.iter().map(|&r| softplus(r)).collect();
        let mu_pv = apply_pv_physics_mask(&self.mu_pv, &exo.daylight_flag, &exo.norm_daylight);
        let dist = ForecastDistribution { mu_load: self.mu_load.clone(), var_load: var(&self.var_load), mu_pv, var_pv: var(&self.var_pv) };
        (dist, pre_mask)
    }
}

pub(crate) struct HeadVars {
    pub mu_load: Var,
    pub var_load: Var,
    pub mu_pv: Var,
    pub var_pv: Var,
}

/// A forecaster: config, input width and parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct KtuModel<T: Scalar> {
    config: KtuConfig,
    feature_dim: usize,
    params: KtuParameters<T>,
    layout: Layout,
}

impl<T: Scalar> KtuModel<T> {
    /// Fresh model with Xavier-uniform weights drawn from `config.seed`.
    pub fn new(config: KtuConfig, feature_dim: usize) -> Result<Self, KtuError> {
        config.validate()?;
        if feature_dim == 0 {
            return Err(KtuError::InvalidConfig { field: "feature_dim", reason: "must be at least 1".into() });
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let (layout, params) = build_layout(&config, feature_dim, &mut rng);
        Ok(Self { config, feature_dim, params, layout })
    }

    /// Rebuilds a model around existing tensors, checking names and shapes.
    pub fn from_parameters(config: KtuConfig, feature_dim: usize, params: KtuParameters<T>) -> Result<Self, KtuError> {
        let fresh = Self::new(config, feature_dim)?;
        if fresh.params.names != params.names {
            return Err(KtuError::Checkpoint("parameter names do not match the config".into()));
        }
        for ((name, a), b) in params.names.iter().zip(&fresh.params.tensors).zip(&params.tensors) {
            if a.shape() != b.shape() {
                return Err(KtuError::Checkpoint(format!("{name}: shape {:?}, expected {:?}", b.shape(), a.shape())));
            }
        }
        Ok(Self { params, ..fresh })
    }

    pub fn config(&self) -> &KtuConfig {
        &self.config
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn parameters(&self) -> &KtuParameters<T> {
        &self.params
    }

    pub fn parameters_mut(&mut self) -> &mut KtuParameters<T> {
        &mut self.params
    }

    pub(crate) fn check_input(&self, input: &Matrix<T>, exo: &HorizonExo<T>) -> Result<(), KtuError> {
        if input.rows() != self.config.window {
            return Err(KtuError::Dimension(format!(
                "window length {} does not match the positional table ({})",
                input.rows(),
                self.config.window
            )));
        }
        if input.cols() != self.feature_dim {
            return Err(KtuError::Dimension(format!("feature width {}, expected {}", input.cols(), self.feature_dim)));
        }
        if exo.len() != self.config.horizon || exo.norm_daylight.len() != self.config.horizon {
            return Err(KtuError::Dimension(format!("{} exogenous steps, expected {}", exo.len(), self.config.horizon)));
        }
        Ok(())
    }

    /// Records the forward pass on `tape` (which must borrow this model's
    /// tensors). With `rng` set, dropout is active.
    pub(crate) fn record<R: Rng>(&self, tape: &mut Tape<'_, T>, input: &Matrix<T>, mut rng: Option<&mut R>) -> HeadVars {
        let p = self.config.dropout;
        let mut drop = |tape: &mut Tape<'_, T>, v: Var| -> Var {
            match rng.as_deref_mut() {
                Some(r) if p > 0.0 => {
                    let (rows, cols) = tape.value(v).shape();
                    let keep = T::of(1.0 / (1.0 - p));
                    let mask = (0..rows * cols).map(|_| if r.random::<f64>() < p { T::zero() } else { keep }).collect();
                    tape.dropout(v, Matrix::from_vec(rows, cols, mask))
                }
                _ => v,
            }
        };
        let l = &self.layout;
        let affine = |tape: &mut Tape<'_, T>, x: Var, a: Affine| {
            let (w, b) = (tape.param(a.w), tape.param(a.b));
            tape.affine(x, w, b)
        };
        let norm = |tape: &mut Tape<'_, T>, x: Var, n: Norm| {
            let (g, b) = (tape.param(n.gamma), tape.param(n.beta));
            tape.layer_norm(x, g, b)
        };

        let x = tape.constant(input.clone());
        let h = affine(tape, x, l.in1);
        let h = norm(tape, h, l.in_ln1);
        let h = tape.relu(h);
        let h = affine(tape, h, l.in2);
        let h = norm(tape, h, l.in_ln2);
        let pos = tape.param(l.pos);
        let mut h = tape.add(h, pos);
        for blk in &l.blocks {
            let w = [tape.param(blk.wq), tape.param(blk.wk), tape.param(blk.wv), tape.param(blk.wo)];
            let a = attention_on_tape(tape, h, w, self.config.n_heads);
            let a = drop(tape, a);
            let r = tape.add(h, a);
            h = norm(tape, r, blk.ln1);
            let f = affine(tape, h, blk.ff1);
            let f = tape.relu(f);
            let f = drop(tape, f);
            let f = affine(tape, f, blk.ff2);
            let f = drop(tape, f);
            let r = tape.add(h, f);
            h = norm(tape, r, blk.ln2);
        }
        let last = tape.row(h, self.config.window - 1);
        HeadVars {
            mu_load: affine(tape, last, l.mu_load),
            var_load: affine(tape, last, l.var_load),
            mu_pv: affine(tape, last, l.mu_pv),
            var_pv: affine(tape, last, l.var_pv),
        }
    }

    /// Head outputs before activation, evaluation mode.
    pub fn forward_raw(&self, input: &Matrix<T>, exo: &HorizonExo<T>) -> Result<RawHeads<T>, KtuError> {
        self.check_input(input, exo)?;
        let mut tape = Tape::new(&self.params.tensors);
        let heads = self.record::<ChaCha8Rng>(&mut tape, input, None);
        Ok(raw_from_tape(&tape, &heads))
    }

    /// Evaluation-mode forecast for one window.
    pub fn forward(&self, input: &Matrix<T>, exo: &HorizonExo<T>) -> Result<ForecastDistribution<T>, KtuError> {
        let raw = self.forward_raw(input, exo)?;
        Ok(raw.activate(exo, T::of(self.config.epsilon_stab)).0)
    }

    /// Evaluation-mode forecasts for a batch of windows.
    pub fn forward_batch(&self, batch: &[(&Matrix<T>, &HorizonExo<T>)]) -> Result<Vec<ForecastDistribution<T>>, KtuError> {
        batch.iter().map(|(x, e)| self.forward(x, e)).collect()
    }
}

pub(crate) fn raw_from_tape<T: Scalar>(tape: &Tape<'_, T>, h: &HeadVars) -> RawHeads<T> {
    let v = |x: Var| tape.value(x).as_slice().to_vec();
    RawHeads { mu_load: v(h.mu_load), var_load: v(h.var_load), mu_pv: v(h.mu_pv), var_pv: v(h.var_pv) }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tiny() -> KtuConfig {
        KtuConfig { d_model: 8, n_heads: 2, n_layers: 1, d_ff: 16, window: 5, horizon: 3, ..KtuConfig::default() }
    }

    fn exo(flags: [f64; 3]) -> HorizonExo<f64> {
        HorizonExo { daylight_flag: flags.to_vec(), norm_daylight: vec![0.7; 3], hour: vec![1, 2, 3] }
    }

    #[test]
    fn mask_examples() {
        let out = apply_pv_physics_mask(&[5.0, 0.0, 3.0], &[0.0, 1.0, 1.0], &[0.8, 1.0, 0.5]);
        assert_eq!(out[0], 0.0);
        assert!((out[1] - std::f64::consts::LN_2).abs() < 1e-12);
        assert!((out[2] - 0.5 * (1.0 + 3.0_f64.exp()).ln()).abs() < 1e-12);
        assert!((out[2] - 1.5243).abs() < 1e-4);
    }

    #[test]
    fn single_head_identity_single_row() {
        let i = Matrix::<f64>::identity(4);
        let w = AttentionWeights { w_q: i.clone(), w_k: i.clone(), w_v: i.clone(), w_o: i };
        let x = Matrix::row_vector(vec![0.3, -1.0, 2.0, 0.5]);
        assert_eq!(multi_head_attention(&w, &x, 1).unwrap(), x);
        assert!(multi_head_attention(&w, &x, 3).is_err());
        let bad = AttentionWeights { w_o: Matrix::identity(3), ..w.clone() };
        assert!(multi_head_attention(&bad, &x, 1).is_err());
    }

    #[test]
    fn layout_names_and_shapes() {
        let m = KtuModel::<f64>::new(tiny(), 6).unwrap();
        let p = m.parameters();
        assert_eq!(p.get("positional").unwrap().shape(), (5, 8));
        assert_eq!(p.get("layer0.attn.w_q").unwrap().shape(), (8, 8));
        assert_eq!(p.get("head.var_pv.weight").unwrap().shape(), (8, 3));
        assert_eq!(p.get("input.0.weight").unwrap().shape(), (6, 8));
        assert!(p.get("layer1.attn.w_q").is_none());
    }

    #[test]
    fn forward_contracts() {
        let m = KtuModel::<f64>::new(tiny(), 6).unwrap();
        let x = Matrix::from_vec(5, 6, (0..30).map(|i| (i as f64 * 0.37).sin()).collect());
        let a = m.forward(&x, &exo([1.0, 0.0, 1.0])).unwrap();
        let b = m.forward(&x, &exo([1.0, 0.0, 1.0])).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.mu_pv[1], 0.0);
        assert!(a.var_load.iter().chain(&a.var_pv).all(|&v| v > 0.0));
        let night = m.forward(&x, &exo([0.0; 3])).unwrap();
        assert_eq!(night.mu_pv, vec![0.0; 3]);

        let short = Matrix::zeros(4, 6);
        assert!(matches!(m.forward(&short, &exo([1.0; 3])), Err(KtuError::Dimension(_))));
    }

    #[test]
    fn same_seed_same_init() {
        let a = KtuModel::<f64>::new(tiny(), 6).unwrap();
        let b = KtuModel::<f64>::new(tiny(), 6).unwrap();
        assert_eq!(a.parameters(), b.parameters());
        let c = KtuModel::<f64>::new(KtuConfig { seed: 1, ..tiny() }, 6).unwrap();
        assert_ne!(a.parameters(), c.parameters());
    }
}
