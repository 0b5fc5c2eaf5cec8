//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] records a forward computation as a list of nodes. Parameter
//! leaves borrow their values from a caller-owned parameter slice, so a tape
//! is cheap to build per sample. [`Tape::backward`] propagates seeded output
//! gradients back to every parameter leaf and returns one gradient matrix per
//! parameter, in parameter order.

use crate::linalg::Matrix;
use crate::Scalar;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T> {
    Constant,
    Param(usize),
    MatMul(Var, Var),
    MatMulT(Var, Var),
    Add(Var, Var),
    AddRow(Var, Var),
    Relu(Var),
    Scale(Var, T),
    SoftmaxRows(Var),
    LayerNorm { x: Var, gamma: Var, beta: Var, xhat: Matrix<T>, inv_std: Vec<T> },
    SliceCols(Var, usize),
    ConcatCols(Vec<Var>),
    Row(Var, usize),
    Dropout(Var, Matrix<T>),
}

struct Node<T> {
    op: Op<T>,
    value: Option<Matrix<T>>,
}

pub struct Tape<'p, T: Scalar> {
    params: &'p [Matrix<T>],
    nodes: Vec<Node<T>>,
}

const LAYER_NORM_EPS: f64 = 1e-5;

impl<'p, T: Scalar> Tape<'p, T> {
    pub fn new(params: &'p [Matrix<T>]) -> Self {
        Self { params, nodes: Vec::with_capacity(128) }
    }

    pub fn value(&self, v: Var) -> &Matrix<T> {
        let node = &self.nodes[v.0];
        match (&node.op, &node.value) {
            (Op::Param(i), _) => &self.params[*i],
            (_, Some(m)) => m,
            _ => unreachable!("non-parameter node without a value"),
        }
    }

    fn push(&mut self, op: Op<T>, value: Matrix<T>) -> Var {
        self.nodes.push(Node { op, value: Some(value) });
        Var(self.nodes.len() - 1)
    }

    pub fn constant(&mut self, m: Matrix<T>) -> Var {
        self.push(Op::Constant, m)
    }

    pub fn param(&mut self, index: usize) -> Var {
        assert!(index < self.params.len(), "unknown parameter {index}");
        self.nodes.push(Node { op: Op::Param(index), value: None });
        Var(self.nodes.len() - 1)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul(self.value(b));
        self.push(Op::MatMul(a, b), v)
    }

    /// `a · bᵀ`
    pub fn matmul_t(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).matmul_t(self.value(b));
        self.push(Op::MatMulT(a, b), v)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a).zip_map(self.value(b), |x, y| x + y);
        self.push(Op::Add(a, b), v)
    }

    /// Adds a `1 × n` row to every row of `a`.
    pub fn add_row(&mut self, a: Var, row: Var) -> Var {
        let r = self.value(row);
        assert_eq!(r.rows(), 1, "add_row expects a row vector");
        let mut v = self.value(a).clone();
        assert_eq!(v.cols(), r.cols(), "add_row width mismatch");
        for i in 0..v.rows() {
            for (x, &b) in v.row_mut(i).iter_mut().zip(r.as_slice()) {
                *x += b;
            }
        }
        self.push(Op::AddRow(a, row), v)
    }

    /// `x · w + b`
    pub fn affine(&mut self, x: Var, w: Var, b: Var) -> Var {
        let xw = self.matmul(x, w);
        self.add_row(xw, b)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        let v = self.value(a).map(|x| x.max(T::zero()));
        self.push(Op::Relu(a), v)
    }

    pub fn scale(&mut self, a: Var, s: T) -> Var {
        let v = self.value(a).map(|x| x * s);
        self.push(Op::Scale(a, s), v)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let mut v = self.value(a).clone();
        for i in 0..v.rows() {
            let row = v.row_mut(i);
            let max = row.iter().copied().fold(T::neg_infinity(), T::max);
            let mut sum = T::zero();
            for x in row.iter_mut() {
                *x = (*x - max).exp();
                sum += *x;
            }
            for x in row.iter_mut() {
                *x /= sum;
            }
        }
        self.push(Op::SoftmaxRows(a), v)
    }

    /// Row-wise layer normalisation with affine `gamma`, `beta` (both `1 × n`).
    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var) -> Var {
        let input = self.value(x);
        let (rows, cols) = input.shape();
        let n = T::from_usize(cols).unwrap();
        let eps = T::of(LAYER_NORM_EPS);
        let mut xhat = Matrix::zeros(rows, cols);
        let mut inv_std = Vec::with_capacity(rows);
        for i in 0..rows {
            let row = input.row(i);
            let mean = row.iter().copied().sum::<T>() / n;
            let var = row.iter().map(|&v| (v - mean) * (v - mean)).sum::<T>() / n;
            let inv = T::one() / (var + eps).sqrt();
            for (o, &v) in xhat.row_mut(i).iter_mut().zip(row) {
                *o = (v - mean) * inv;
            }
            inv_std.push(inv);
        }
        let g = self.value(gamma).as_slice();
        let b = self.value(beta).as_slice();
        let mut out = xhat.clone();
        for i in 0..rows {
            for ((o, &gj), &bj) in out.row_mut(i).iter_mut().zip(g).zip(b) {
                *o = *o * gj + bj;
            }
        }
        self.push(Op::LayerNorm { x, gamma, beta, xhat, inv_std }, out)
    }

    pub fn slice_cols(&mut self, a: Var, start: usize, len: usize) -> Var {
        let v = self.value(a).slice_cols(start, len);
        self.push(Op::SliceCols(a, start), v)
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Var {
        let rows = self.value(parts[0]).rows();
        let cols: usize = parts.iter().map(|&p| self.value(p).cols()).sum();
        let mut out = Matrix::zeros(rows, cols);
        let mut offset = 0;
        for &p in parts {
            let m = self.value(p);
            assert_eq!(m.rows(), rows, "concat row mismatch");
            for i in 0..rows {
                out.row_mut(i)[offset..offset + m.cols()].copy_from_slice(m.row(i));
            }
            offset += m.cols();
        }
        self.push(Op::ConcatCols(parts.to_vec()), out)
    }

    pub fn row(&mut self, a: Var, r: usize) -> Var {
        let v = Matrix::row_vector(self.value(a).row(r).to_vec());
        self.push(Op::Row(a, r), v)
    }

    /// Multiplies elementwise by a precomputed (already rescaled) mask.
    pub fn dropout(&mut self, a: Var, mask: Matrix<T>) -> Var {
        let v = self.value(a).zip_map(&mask, |x, m| x * m);
        self.push(Op::Dropout(a, mask), v)
    }

    /// Back-propagates the given output seeds and returns the gradient of
    /// every parameter (zeros for parameters the tape never touched).
    pub fn backward(&self, seeds: &[(Var, Matrix<T>)]) -> Vec<Matrix<T>> {
        let mut grads: Vec<Option<Matrix<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        for (v, g) in seeds {
            accumulate(&mut grads, *v, g.clone());
        }
        let mut param_grads: Vec<Matrix<T>> = self
            .params
            .iter()
            .map(|p| Matrix::zeros(p.rows(), p.cols()))
            .collect();

        for idx in (0..self.nodes.len()).rev() {
            let Some(g) = grads[idx].take() else { continue };
            match &self.nodes[idx].op {
                Op::Constant => {}
                Op::Param(i) => param_grads[*i].add_assign(&g),
                Op::MatMul(a, b) => {
                    let ga = g.matmul_t(self.value(*b));
                    let gb = self.value(*a).t_matmul(&g);
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::MatMulT(a, b) => {
                    // y = a bᵀ: da = g b, db = gᵀ a
                    let ga = g.matmul(self.value(*b));
                    let gb = g.t_matmul(self.value(*a));
                    accumulate(&mut grads, *a, ga);
                    accumulate(&mut grads, *b, gb);
                }
                Op::Add(a, b) => {
                    accumulate(&mut grads, *b, g.clone());
                    accumulate(&mut grads, *a, g);
                }
                Op::AddRow(a, row) => {
                    accumulate(&mut grads, *row, g.sum_rows());
                    accumulate(&mut grads, *a, g);
                }
                Op::Relu(a) => {
                    let x = self.value(*a);
                    let ga = g.zip_map(x, |gi, xi| if xi > T::zero() { gi } else { T::zero() });
                    accumulate(&mut grads, *a, ga);
                }
                Op::Scale(a, s) => {
                    let s = *s;
                    accumulate(&mut grads, *a, g.map(|x| x * s));
                }
                Op::SoftmaxRows(a) => {
                    let y = self.nodes[idx].value.as_ref().unwrap();
                    let mut ga = Matrix::zeros(y.rows(), y.cols());
                    for i in 0..y.rows() {
                        let yr = y.row(i);
                        let gr = g.row(i);
                        let dot: T = yr.iter().zip(gr).map(|(&p, &q)| p * q).sum();
                        for ((o, &p), &q) in ga.row_mut(i).iter_mut().zip(yr).zip(gr) {
                            *o = p * (q - dot);
                        }
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::LayerNorm { x, gamma, beta, xhat, inv_std } => {
                    let gam = self.value(*gamma).as_slice();
                    let (rows, cols) = xhat.shape();
                    let n = T::from_usize(cols).unwrap();
                    let mut gx = Matrix::zeros(rows, cols);
                    let mut ggamma = Matrix::zeros(1, cols);
                    let mut gbeta = Matrix::zeros(1, cols);
                    for i in 0..rows {
                        let gr = g.row(i);
                        let xr = xhat.row(i);
                        let mut sum_d = T::zero();
                        let mut sum_dx = T::zero();
                        for j in 0..cols {
                            let d = gr[j] * gam[j];
                            sum_d += d;
                            sum_dx += d * xr[j];
                            ggamma.as_mut_slice()[j] += gr[j] * xr[j];
                            gbeta.as_mut_slice()[j] += gr[j];
                        }
                        let scale = inv_std[i] / n;
                        for j in 0..cols {
                            let d = gr[j] * gam[j];
                            gx[(i, j)] = scale * (n * d - sum_d - xr[j] * sum_dx);
                        }
                    }
                    accumulate(&mut grads, *gamma, ggamma);
                    accumulate(&mut grads, *beta, gbeta);
                    accumulate(&mut grads, *x, gx);
                }
                Op::SliceCols(a, start) => {
                    let src = self.value(*a);
                    let mut ga = Matrix::zeros(src.rows(), src.cols());
                    for i in 0..g.rows() {
                        ga.row_mut(i)[*start..*start + g.cols()].copy_from_slice(g.row(i));
                    }
                    accumulate(&mut grads, *a, ga);
                }
                Op::ConcatCols(parts) => {
                    let mut offset = 0;
                    for &p in parts {
                        let w = self.value(p).cols();
                        accumulate(&mut grads, p, g.slice_cols(offset, w));
                        offset += w;
                    }
                }
                Op::Row(a, r) => {
                    let src = self.value(*a);
                    let mut ga = Matrix::zeros(src.rows(), src.cols());
                    ga.row_mut(*r).copy_from_slice(g.as_slice());
                    accumulate(&mut grads, *a, ga);
                }
                Op::Dropout(a, mask) => {
                    accumulate(&mut grads, *a, g.zip_map(mask, |x, m| x * m));
                }
            }
        }
        param_grads
    }
}

fn accumulate<T: Scalar>(grads: &mut [Option<Matrix<T>>], v: Var, g: Matrix<T>) {
    match &mut grads[v.0] {
        Some(existing) => existing.add_assign(&g),
        slot @ None => *slot = Some(g),
    }
}
