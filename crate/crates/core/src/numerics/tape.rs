//! Reverse-mode differentiation over dense matrices.
//!
//! A [`Tape`] owns every value produced during a forward pass together with
//! the primitive that produced it. Nodes are appended in execution order, so
//! the node list is already topologically sorted and [`Tape::backward`] is a
//! single reverse sweep. Gradients accumulate across fan-out and across
//! repeated `backward` calls until [`Tape::zero_grad`].
//!
//! ```
//! use ligram::numerics::{Matrix, Tape};
//!
//! let mut tape = Tape::new();
//! let w = tape.param(Matrix::from_rows(&[[3.0]]));
//! let sq = tape.mul(w, w).unwrap();
//! let loss = tape.sum(sq).unwrap();
//! tape.backward(loss).unwrap();
//! assert_eq!(tape.grad(w).unwrap()[(0, 0)], 6.0);
//! ```

use std::sync::Arc;

use rand::Rng;

use crate::error::{Error, Result};
use crate::numerics::{Matrix, SparseMatrix};

/// Columns or rows with a Euclidean norm below this map to zero.
pub const NORM_EPS: f64 = 1e-12;

/// Handle to a node on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    Rows,
    Cols,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

#[derive(Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    SparseMatMul(Arc<SparseMatrix>, Var),
    Relu(Var),
    SoftmaxRows(Var),
    Log { x: Var, floor: Option<f64> },
    Exp(Var),
    Add(Var, Var),
    Mul(Var, Var),
    MulConst(Var, Matrix),
    Scale(Var, f64),
    ConcatCols(Vec<Var>),
    Normalize(Var, Axis),
    Dropout(Var, Matrix),
    Transpose(Var),
    GatherRows(Var, Vec<usize>),
    Sum(Var),
    Mean(Var),
    SumRows(Var),
    MaskedLogSumExpRows(Var, Matrix),
}

#[derive(Debug)]
struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
}

fn shape_err(op: &'static str, a: &Matrix, b: &Matrix) -> Error {
    Error::ShapeMismatch {
        op,
        left: a.shape(),
        right: b.shape(),
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// A leaf that receives gradients.
    pub fn param(&mut self, value: Matrix) -> Var {
        self.push_unchecked(value, Op::Leaf, true)
    }

    /// A leaf excluded from differentiation.
    pub fn constant(&mut self, value: Matrix) -> Var {
        self.push_unchecked(value, Op::Leaf, false)
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    /// Accumulated gradient, if `backward` has reached this node.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn zero_grad(&mut self) {
        self.grads.clear();
    }

    fn push_unchecked(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn push(&mut self, name: &'static str, value: Matrix, op: Op, inputs: &[Var]) -> Result<Var> {
        if !value.is_finite() {
            return Err(Error::NonFinite(name));
        }
        let requires_grad = inputs.iter().any(|v| self.nodes[v.0].requires_grad);
        Ok(self.push_unchecked(value, op, requires_grad))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).matmul(self.value(b))?;
        self.push("matmul", value, Op::MatMul(a, b), &[a, b])
    }

    /// Sparse constant times a dense node.
    pub fn sparse_matmul(&mut self, s: Arc<SparseMatrix>, x: Var) -> Result<Var> {
        let value = s.matmul_dense(self.value(x))?;
        self.push("sparse_dense_matmul", value, Op::SparseMatMul(s, x), &[x])
    }

    pub fn relu(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(|v| if v > 0.0 { v } else { 0.0 });
        self.push("relu", value, Op::Relu(x), &[x])
    }

    pub fn softmax_rows(&mut self, x: Var) -> Result<Var> {
        let value = softmax_rows(self.value(x));
        self.push("softmax_rows", value, Op::SoftmaxRows(x), &[x])
    }

    pub fn log(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::ln);
        self.push("log", value, Op::Log { x, floor: None }, &[x])
    }

    /// `ln(max(x, floor))`; entries at or below `floor` get zero gradient.
    pub fn log_clamped(&mut self, x: Var, floor: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v.max(floor).ln());
        self.push(
            "log",
            value,
            Op::Log {
                x,
                floor: Some(floor),
            },
            &[x],
        )
    }

    pub fn exp(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).map(f64::exp);
        self.push("exp", value, Op::Exp(x), &[x])
    }

    /// Elementwise sum. `b` may also be a row vector (1 x cols) or a column
    /// vector (rows x 1) broadcast against `a`.
    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (av, bv) = (self.value(a), self.value(b));
        let value = if av.shape() == bv.shape() {
            av.zip_map(bv, |x, y| x + y)?
        } else if bv.rows() == 1 && bv.cols() == av.cols() {
            let mut out = av.clone();
            for i in 0..out.rows() {
                for (o, y) in out.row_mut(i).iter_mut().zip(bv.row(0)) {
                    *o += y;
                }
            }
            out
        } else if bv.cols() == 1 && bv.rows() == av.rows() {
            let mut out = av.clone();
            for i in 0..out.rows() {
                let y = bv[(i, 0)];
                out.row_mut(i).iter_mut().for_each(|o| *o += y);
            }
            out
        } else {
            return Err(shape_err("add", av, bv));
        };
        self.push("add", value, Op::Add(a, b), &[a, b])
    }

    /// Elementwise (Hadamard) product of two same-shape nodes.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = self.value(a).zip_map(self.value(b), |x, y| x * y)?;
        self.push("mul", value, Op::Mul(a, b), &[a, b])
    }

    /// Elementwise product with a constant matrix (masks, one-hot targets).
    pub fn mul_const(&mut self, x: Var, c: Matrix) -> Result<Var> {
        let value = self.value(x).zip_map(&c, |a, b| a * b)?;
        self.push("mul_const", value, Op::MulConst(x, c), &[x])
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Result<Var> {
        let value = self.value(x).map(|v| v * factor);
        self.push("scale", value, Op::Scale(x, factor), &[x])
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let mats: Vec<&Matrix> = parts.iter().map(|&p| self.value(p)).collect();
        let value = Matrix::hconcat(&mats)?;
        self.push("concat_cols", value, Op::ConcatCols(parts.to_vec()), parts)
    }

    /// Divides each row (or column) by its L2 norm; vectors with norm below
    /// [`NORM_EPS`] become zero and pass no gradient.
    pub fn l2_normalize(&mut self, x: Var, axis: Axis) -> Result<Var> {
        let value = l2_normalize(self.value(x), axis);
        self.push("l2_normalize", value, Op::Normalize(x, axis), &[x])
    }

    pub fn l2_normalize_rows(&mut self, x: Var) -> Result<Var> {
        self.l2_normalize(x, Axis::Rows)
    }

    pub fn l2_normalize_cols(&mut self, x: Var) -> Result<Var> {
        self.l2_normalize(x, Axis::Cols)
    }

    /// Inverted dropout. Survivors are scaled by `1 / (1 - rate)`; in
    /// evaluation mode, or with `rate == 0`, the input node is returned as is.
    pub fn dropout<R: Rng + ?Sized>(
        &mut self,
        x: Var,
        rate: f64,
        mode: Mode,
        rng: &mut R,
    ) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::DropoutRate(rate));
        }
        if mode == Mode::Eval || rate == 0.0 {
            return Ok(x);
        }
        let keep = 1.0 - rate;
        let (rows, cols) = self.value(x).shape();
        let mut mask = Matrix::zeros(rows, cols);
        for m in mask.as_mut_slice() {
            if rng.gen::<f64>() < keep {
                *m = 1.0 / keep;
            }
        }
        let value = self.value(x).zip_map(&mask, |a, b| a * b)?;
        self.push("dropout", value, Op::Dropout(x, mask), &[x])
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = self.value(x).transpose();
        self.push("transpose", value, Op::Transpose(x), &[x])
    }

    pub fn gather_rows(&mut self, x: Var, indices: &[usize]) -> Result<Var> {
        let src = self.value(x);
        if let Some(&bad) = indices.iter().find(|&&i| i >= src.rows()) {
            return Err(Error::ShapeMismatch {
                op: "gather_rows",
                left: src.shape(),
                right: (bad, 0),
            });
        }
        let value = src.select_rows(indices);
        self.push("gather_rows", value, Op::GatherRows(x, indices.to_vec()), &[x])
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = Matrix::scalar(self.value(x).sum());
        self.push("sum", value, Op::Sum(x), &[x])
    }

    pub fn mean(&mut self, x: Var) -> Result<Var> {
        let m = self.value(x);
        let n = (m.rows() * m.cols()).max(1) as f64;
        let value = Matrix::scalar(m.sum() / n);
        self.push("mean", value, Op::Mean(x), &[x])
    }

    /// Row sums as a column vector.
    pub fn sum_rows(&mut self, x: Var) -> Result<Var> {
        let m = self.value(x);
        let mut value = Matrix::zeros(m.rows(), 1);
        for i in 0..m.rows() {
            value[(i, 0)] = m.row(i).iter().sum();
        }
        self.push("sum_rows", value, Op::SumRows(x), &[x])
    }

    /// Per-row `ln Σ_{j : mask[i][j] ≠ 0} exp(x[i][j])` as a column vector,
    /// evaluated with a max shift. Rows with an empty mask yield 0.
    pub fn masked_logsumexp_rows(&mut self, x: Var, mask: Matrix) -> Result<Var> {
        let m = self.value(x);
        if m.shape() != mask.shape() {
            return Err(shape_err("masked_logsumexp_rows", m, &mask));
        }
        let mut value = Matrix::zeros(m.rows(), 1);
        for i in 0..m.rows() {
            value[(i, 0)] = masked_lse(m.row(i), mask.row(i)).unwrap_or(0.0);
        }
        self.push(
            "masked_logsumexp_rows",
            value,
            Op::MaskedLogSumExpRows(x, mask),
            &[x],
        )
    }

    /// Pairwise cosine similarity between rows: `normalize(x) · normalize(x)ᵀ`.
    pub fn cosine_similarity_matrix(&mut self, x: Var) -> Result<Var> {
        let n = self.l2_normalize_rows(x)?;
        let nt = self.transpose(n)?;
        self.matmul(n, nt)
    }

    /// Reverse sweep from a scalar node. Gradients are added to any already
    /// accumulated by earlier sweeps.
    pub fn backward(&mut self, loss: Var) -> Result<()> {
        let shape = self.value(loss).shape();
        if shape != (1, 1) {
            return Err(Error::NonScalarLoss(shape));
        }
        let mut local: Vec<Option<Matrix>> = (0..=loss.0).map(|_| None).collect();
        local[loss.0] = Some(Matrix::scalar(1.0));

        for idx in (0..=loss.0).rev() {
            let Some(g) = local[idx].take() else {
                continue;
            };
            if !self.nodes[idx].requires_grad {
                continue;
            }
            self.propagate(idx, &g, &mut local)?;
            if self.grads.len() < self.nodes.len() {
                self.grads.resize_with(self.nodes.len(), || None);
            }
            match &mut self.grads[idx] {
                Some(acc) => acc.add_assign(&g),
                slot @ None => *slot = Some(g),
            }
        }
        Ok(())
    }

    fn propagate(&self, idx: usize, g: &Matrix, local: &mut [Option<Matrix>]) -> Result<()> {
        let node = &self.nodes[idx];
        let y = &node.value;
        let mut send = |v: Var, contribution: Matrix| {
            if !self.nodes[v.0].requires_grad {
                return;
            }
            match &mut local[v.0] {
                Some(acc) => acc.add_assign(&contribution),
                slot @ None => *slot = Some(contribution),
            }
        };
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                if self.nodes[a.0].requires_grad {
                    send(*a, g.matmul_nt(self.value(*b))?);
                }
                if self.nodes[b.0].requires_grad {
                    send(*b, self.value(*a).matmul_tn(g)?);
                }
            }
            Op::SparseMatMul(s, x) => send(*x, s.transpose_matmul_dense(g)?),
            Op::Relu(x) => {
                let dx = self.value(*x).zip_map(g, |v, gv| if v > 0.0 { gv } else { 0.0 })?;
                send(*x, dx);
            }
            Op::SoftmaxRows(x) => {
                let mut dx = Matrix::zeros(y.rows(), y.cols());
                for i in 0..y.rows() {
                    let (yr, gr) = (y.row(i), g.row(i));
                    let inner: f64 = yr.iter().zip(gr).map(|(a, b)| a * b).sum();
                    for (j, d) in dx.row_mut(i).iter_mut().enumerate() {
                        *d = yr[j] * (gr[j] - inner);
                    }
                }
                send(*x, dx);
            }
            Op::Log { x, floor } => {
                let floor = floor.unwrap_or(f64::NEG_INFINITY);
                let dx = self
                    .value(*x)
                    .zip_map(g, |v, gv| if v > floor { gv / v } else { 0.0 })?;
                send(*x, dx);
            }
            Op::Exp(x) => send(*x, y.zip_map(g, |a, b| a * b)?),
            Op::Add(a, b) => {
                send(*a, g.clone());
                let bshape = self.value(*b).shape();
                if bshape == g.shape() {
                    send(*b, g.clone());
                } else if bshape.0 == 1 {
                    let mut db = Matrix::zeros(1, g.cols());
                    for i in 0..g.rows() {
                        for (d, v) in db.row_mut(0).iter_mut().zip(g.row(i)) {
                            *d += v;
                        }
                    }
                    send(*b, db);
                } else {
                    let mut db = Matrix::zeros(g.rows(), 1);
                    for i in 0..g.rows() {
                        db[(i, 0)] = g.row(i).iter().sum();
                    }
                    send(*b, db);
                }
            }
            Op::Mul(a, b) => {
                send(*a, g.zip_map(self.value(*b), |x, y| x * y)?);
                send(*b, g.zip_map(self.value(*a), |x, y| x * y)?);
            }
            Op::MulConst(x, c) => send(*x, g.zip_map(c, |a, b| a * b)?),
            Op::Scale(x, f) => send(*x, g.map(|v| v * f)),
            Op::ConcatCols(parts) => {
                let mut offset = 0;
                for p in parts {
                    let cols = self.value(*p).cols();
                    let mut dp = Matrix::zeros(g.rows(), cols);
                    for i in 0..g.rows() {
                        dp.row_mut(i)
                            .copy_from_slice(&g.row(i)[offset..offset + cols]);
                    }
                    offset += cols;
                    send(*p, dp);
                }
            }
            Op::Normalize(x, axis) => send(*x, l2_normalize_backward(self.value(*x), y, g, *axis)),
            Op::Dropout(x, mask) => send(*x, g.zip_map(mask, |a, b| a * b)?),
            Op::Transpose(x) => send(*x, g.transpose()),
            Op::GatherRows(x, indices) => {
                let src = self.value(*x);
                let mut dx = Matrix::zeros(src.rows(), src.cols());
                for (r, &i) in indices.iter().enumerate() {
                    for (d, v) in dx.row_mut(i).iter_mut().zip(g.row(r)) {
                        *d += v;
                    }
                }
                send(*x, dx);
            }
            Op::Sum(x) => {
                let (r, c) = self.value(*x).shape();
                send(*x, Matrix::filled(r, c, g[(0, 0)]));
            }
            Op::Mean(x) => {
                let (r, c) = self.value(*x).shape();
                let n = (r * c).max(1) as f64;
                send(*x, Matrix::filled(r, c, g[(0, 0)] / n));
            }
            Op::SumRows(x) => {
                let (r, c) = self.value(*x).shape();
                let mut dx = Matrix::zeros(r, c);
                for i in 0..r {
                    let gi = g[(i, 0)];
                    dx.row_mut(i).iter_mut().for_each(|d| *d = gi);
                }
                send(*x, dx);
            }
            Op::MaskedLogSumExpRows(x, mask) => {
                let src = self.value(*x);
                let mut dx = Matrix::zeros(src.rows(), src.cols());
                for i in 0..src.rows() {
                    let Some(lse) = masked_lse(src.row(i), mask.row(i)) else {
                        continue;
                    };
                    let gi = g[(i, 0)];
                    for j in 0..src.cols() {
                        if mask[(i, j)] != 0.0 {
                            dx[(i, j)] = gi * (src[(i, j)] - lse).exp();
                        }
                    }
                }
                send(*x, dx);
            }
        }
        Ok(())
    }
}

fn masked_lse(row: &[f64], mask: &[f64]) -> Option<f64> {
    let max = row
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m != 0.0)
        .map(|(&v, _)| v)
        .fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let s: f64 = row
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m != 0.0)
        .map(|(&v, _)| (v - max).exp())
        .sum();
    Some(max + s.ln())
}

/// Row-wise softmax with a max shift.
pub fn softmax_rows(m: &Matrix) -> Matrix {
    let mut out = m.clone();
    for i in 0..out.rows() {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut total = 0.0;
        for v in row.iter_mut() {
            *v = (*v - max).exp();
            total += *v;
        }
        row.iter_mut().for_each(|v| *v /= total);
    }
    out
}

/// Value-level L2 normalization with the zero-vector guard.
pub fn l2_normalize(m: &Matrix, axis: Axis) -> Matrix {
    let mut out = m.clone();
    match axis {
        Axis::Rows => {
            for i in 0..out.rows() {
                let row = out.row_mut(i);
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm < NORM_EPS {
                    row.iter_mut().for_each(|v| *v = 0.0);
                } else {
                    row.iter_mut().for_each(|v| *v /= norm);
                }
            }
        }
        Axis::Cols => {
            for j in 0..out.cols() {
                let norm = (0..out.rows()).map(|i| m[(i, j)].powi(2)).sum::<f64>().sqrt();
                for i in 0..out.rows() {
                    out[(i, j)] = if norm < NORM_EPS { 0.0 } else { m[(i, j)] / norm };
                }
            }
        }
    }
    out
}

// d(x/|x|) = (g - y (y·g)) / |x|
fn l2_normalize_backward(x: &Matrix, y: &Matrix, g: &Matrix, axis: Axis) -> Matrix {
    let mut dx = Matrix::zeros(x.rows(), x.cols());
    let (outer, inner) = match axis {
        Axis::Rows => (x.rows(), x.cols()),
        Axis::Cols => (x.cols(), x.rows()),
    };
    let at = |k: usize, l: usize| match axis {
        Axis::Rows => (k, l),
        Axis::Cols => (l, k),
    };
    for k in 0..outer {
        let norm = (0..inner).map(|l| x[at(k, l)].powi(2)).sum::<f64>().sqrt();
        if norm < NORM_EPS {
            continue;
        }
        let proj: f64 = (0..inner).map(|l| y[at(k, l)] * g[at(k, l)]).sum();
        for l in 0..inner {
            dx[at(k, l)] = (g[at(k, l)] - y[at(k, l)] * proj) / norm;
        }
    }
    dx
}
