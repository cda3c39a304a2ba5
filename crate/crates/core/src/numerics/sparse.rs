use crate::error::{Error, Result};
use crate::numerics::Matrix;

/// Compressed sparse row matrix. Entries within a row are sorted by column and
/// no `(row, col)` pair appears twice.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            row_ptr: vec![0; n_rows + 1],
            col_idx: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn identity(n: usize) -> Self {
        Self {
            n_rows: n,
            n_cols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    /// Builds from `(row, col, weight)` triples in any order. Rejects
    /// out-of-range indices, duplicate coordinates and non-finite weights.
    pub fn from_triples(
        n_rows: usize,
        n_cols: usize,
        mut triples: Vec<(usize, usize, f64)>,
    ) -> Result<Self> {
        triples.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n_rows + 1];
        let mut col_idx = Vec::with_capacity(triples.len());
        let mut values = Vec::with_capacity(triples.len());
        let mut prev: Option<(usize, usize)> = None;
        for &(r, c, w) in &triples {
            if r >= n_rows || c >= n_cols {
                return Err(Error::InvalidSparse(format!(
                    "entry ({r}, {c}) outside {n_rows}x{n_cols}"
                )));
            }
            if !w.is_finite() {
                return Err(Error::InvalidSparse(format!("non-finite weight at ({r}, {c})")));
            }
            if prev == Some((r, c)) {
                return Err(Error::InvalidSparse(format!("duplicate entry ({r}, {c})")));
            }
            prev = Some((r, c));
            row_ptr[r + 1] += 1;
            col_idx.push(c);
            values.push(w);
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Keeps every nonzero entry of a dense matrix.
    pub fn from_dense(m: &Matrix) -> Self {
        let mut triples = Vec::new();
        for i in 0..m.rows() {
            for (j, &v) in m.row(i).iter().enumerate() {
                if v != 0.0 {
                    triples.push((i, j, v));
                }
            }
        }
        Self::from_triples(m.rows(), m.cols(), triples).expect("dense matrix yields valid triples")
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.n_rows, self.n_cols)
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[range.clone()]
            .iter()
            .copied()
            .zip(self.values[range].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n_rows).flat_map(move |i| self.row(i).map(move |(j, w)| (i, j, w)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.n_rows, self.n_cols);
        for (i, j, w) in self.iter() {
            m[(i, j)] = w;
        }
        m
    }

    pub fn transpose(&self) -> SparseMatrix {
        let triples = self.iter().map(|(i, j, w)| (j, i, w)).collect();
        SparseMatrix::from_triples(self.n_cols, self.n_rows, triples).expect("transpose is valid")
    }

    /// Exact structural and numerical symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.n_rows == self.n_cols && self.iter().all(|(i, j, w)| self.get(j, i) == w)
    }

    /// Sum of each row's stored weights.
    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n_rows).map(|i| self.row(i).map(|(_, w)| w).sum()).collect()
    }

    /// Permutes rows and columns: entry `(i, j)` moves to `(perm[i], perm[j])`.
    pub fn permute_symmetric(&self, perm: &[usize]) -> SparseMatrix {
        let triples = self.iter().map(|(i, j, w)| (perm[i], perm[j], w)).collect();
        SparseMatrix::from_triples(self.n_rows, self.n_cols, triples).expect("permutation is valid")
    }

    /// `self · dense`
    pub fn matmul_dense(&self, dense: &Matrix) -> Result<Matrix> {
        if self.n_cols != dense.rows() {
            return Err(Error::ShapeMismatch {
                op: "sparse_dense_matmul",
                left: self.shape(),
                right: dense.shape(),
            });
        }
        let mut out = Matrix::zeros(self.n_rows, dense.cols());
        for i in 0..self.n_rows {
            let out_row = out.row_mut(i);
            for (k, w) in self.row(i) {
                for (o, b) in out_row.iter_mut().zip(dense.row(k)) {
                    *o += w * b;
                }
            }
        }
        Ok(out)
    }

    /// `selfᵀ · dense`
    pub fn transpose_matmul_dense(&self, dense: &Matrix) -> Result<Matrix> {
        if self.n_rows != dense.rows() {
            return Err(Error::ShapeMismatch {
                op: "sparse_dense_matmul_t",
                left: self.shape(),
                right: dense.shape(),
            });
        }
        let mut out = Matrix::zeros(self.n_cols, dense.cols());
        for i in 0..self.n_rows {
            let src = dense.row(i);
            for (k, w) in self.row(i) {
                for (o, b) in out.row_mut(k).iter_mut().zip(src) {
                    *o += w * b;
                }
            }
        }
        Ok(out)
    }
}
