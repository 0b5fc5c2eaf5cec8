//! First-order optimisers over lists of parameter matrices.

use serde::{Deserialize, Serialize};

use crate::linalg::Matrix;
use crate::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    /// Plain stochastic gradient descent, `θ ← θ − η g`.
    Sgd,
    /// Adaptive moment estimation.
    Adam,
}

/// Stateful optimiser for a fixed parameter layout.
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    kind: OptimizerKind,
    learning_rate: T,
    beta1: T,
    beta2: T,
    eps: T,
    step: i32,
    first: Vec<Matrix<T>>,
    second: Vec<Matrix<T>>,
}

impl<T: Scalar> Optimizer<T> {
    pub fn new(kind: OptimizerKind, learning_rate: f64, params: &[Matrix<T>]) -> Self {
        let zeros = || params.iter().map(|p| Matrix::zeros(p.rows(), p.cols())).collect::<Vec<_>>();
        Self {
            kind,
            learning_rate: T::of(learning_rate),
            beta1: T::of(0.9),
            beta2: T::of(0.999),
            eps: T::of(1e-8),
            step: 0,
            first: zeros(),
            second: zeros(),
        }
    }

    pub fn adam(learning_rate: f64, params: &[Matrix<T>]) -> Self {
        Self::new(OptimizerKind::Adam, learning_rate, params)
    }

    pub fn sgd(learning_rate: f64, params: &[Matrix<T>]) -> Self {
        Self::new(OptimizerKind::Sgd, learning_rate, params)
    }

    pub fn kind(&self) -> OptimizerKind {
        self.kind
    }

    /// Applies one descent step using `grads` (same layout as `params`).
    pub fn step(&mut self, params: &mut [Matrix<T>], grads: &[Matrix<T>]) {
        assert_eq!(params.len(), grads.len(), "gradient layout mismatch");
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (w, &d) in p.as_mut_slice().iter_mut().zip(g.as_slice()) {
                        *w -= self.learning_rate * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                self.step += 1;
                let bc1 = T::one() - self.beta1.powi(self.step);
                let bc2 = T::one() - self.beta2.powi(self.step);
                for (i, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let m = self.first[i].as_mut_slice();
                    let v = self.second[i].as_mut_slice();
                    for (k, (w, &d)) in p.as_mut_slice().iter_mut().zip(g.as_slice()).enumerate() {
                        m[k] = self.beta1 * m[k] + (T::one() - self.beta1) * d;
                        v[k] = self.beta2 * v[k] + (T::one() - self.beta2) * d * d;
                        let m_hat = m[k] / bc1;
                        let v_hat = v[k] / bc2;
                        *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.eps);
                    }
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn both_optimisers_descend_a_quadratic() {
        for kind in [OptimizerKind::Sgd, OptimizerKind::Adam] {
            let mut params = vec![Matrix::from_vec(1, 2, vec![3.0_f64, -2.0])];
            let mut opt = Optimizer::new(kind, 0.05, &params);
            for _ in 0..2000 {
                let grads = vec![params[0].map(|x| 2.0 * x)];
                opt.step(&mut params, &grads);
            }
            assert!(params[0].as_slice().iter().all(|x| x.abs() < 1e-3), "{kind:?}: {:?}", params[0]);
        }
    }

    #[test]
    fn zero_learning_rate_is_a_no_op() {
        let mut params = vec![Matrix::from_vec(1, 2, vec![1.5_f32, -0.5])];
        let before = params.clone();
        let mut opt = Optimizer::adam(0.0, &params);
        opt.step(&mut params, &[Matrix::from_vec(1, 2, vec![10.0, -3.0])]);
        assert_eq!(params, before);
    }
}
