use rand::Rng;
use rand_distr::{Distribution, Uniform};
use serde::{Deserialize, Serialize};

use super::AgentError;
use crate::autodiff::{Tape, Var};
use crate::linalg::Matrix;
use crate::rewards::N_ACTIONS;
use crate::Scalar;

/// Two-hidden-layer ReLU network mapping a state to one value per action.
/// Tensors are `[w1, b1, w2, b2, w3, b3]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QNetwork<T> {
    pub tensors: Vec<Matrix<T>>,
}

impl<T: Scalar> QNetwork<T> {
    pub fn new<R: Rng + ?Sized>(state_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut layer = |fan_in: usize, fan_out: usize| {
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let d = Uniform::new_inclusive(-limit, limit).expect("finite bounds");
            let w = Matrix::from_vec(fan_in, fan_out, (0..fan_in * fan_out).map(|_| T::of(d.sample(rng))).collect());
            [w, Matrix::zeros(1, fan_out)]
        };
        let mut tensors = Vec::with_capacity(6);
        tensors.extend(layer(state_dim, hidden));
        tensors.extend(layer(hidden, hidden));
        tensors.extend(layer(hidden, N_ACTIONS));
        Self { tensors }
    }

    pub fn state_dim(&self) -> usize {
        self.tensors[0].rows()
    }

    pub fn hidden(&self) -> usize {
        self.tensors[0].cols()
    }

    pub fn is_finite(&self) -> bool {
        self.tensors.iter().all(Matrix::is_finite)
    }

    pub(crate) fn record(&self, tape: &mut Tape<'_, T>, states: Matrix<T>) -> Var {
        let mut h = tape.constant(states);
        for layer in 0..3 {
            let (w, b) = (tape.param(2 * layer), tape.param(2 * layer + 1));
            h = tape.affine(h, w, b);
            if layer < 2 {
                h = tape.relu(h);
            }
        }
        h
    }

    fn check(&self, state: &[T]) -> Result<(), AgentError> {
        if state.len() != self.state_dim() {
            return Err(AgentError::StateDimension { expected: self.state_dim(), found: state.len() });
        }
        Ok(())
    }

    /// Action values for one state.
    pub fn q_values(&self, state: &[T]) -> Result<Vec<T>, AgentError> {
        self.check(state)?;
        let mut tape = Tape::new(&self.tensors);
        let out = self.record(&mut tape, Matrix::row_vector(state.to_vec()));
        Ok(tape.value(out).as_slice().to_vec())
    }

    /// Action values for a batch of states, one row each.
    pub fn q_batch(&self, states: &[&[T]]) -> Result<Matrix<T>, AgentError> {
        let mut data = Vec::with_capacity(states.len() * self.state_dim());
        for s in states {
            self.check(s)?;
            data.extend_from_slice(s);
        }
        let mut tape = Tape::new(&self.tensors);
        let out = self.record(&mut tape, Matrix::from_vec(states.len(), self.state_dim(), data));
        Ok(tape.value(out).clone())
    }

    /// Copies `other`'s parameters into `self`.
    pub fn copy_from(&mut self, other: &QNetwork<T>) -> Result<(), AgentError> {
        let same = self.tensors.len() == other.tensors.len() && self.tensors.iter().zip(&other.tensors).all(|(a, b)| a.shape() == b.shape());
        if !same {
            return Err(AgentError::ShapeMismatch(format!(
                "{}x{} network vs {}x{}",
                self.state_dim(),
                self.hidden(),
                other.state_dim(),
                other.hidden()
            )));
        }
        self.tensors.clone_from(&other.tensors);
        Ok(())
    }
}

/// Index of the largest value; ties go to the lowest index.
pub(crate) fn argmax<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}
