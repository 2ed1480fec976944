//! Compressed-row sparse matrices, used for superoperators too large to
//! keep dense.

use super::{DenseMatrix, LinalgError, Result, C64, ZERO};

/// Anything that can act on a vector: the interface Krylov methods need.
pub trait LinearOperator {
    fn size(&self) -> usize;
    fn apply(&self, v: &[C64]) -> Vec<C64>;
    /// Maximum absolute row sum.
    fn norm_inf(&self) -> f64;
}

impl LinearOperator for DenseMatrix {
    fn size(&self) -> usize {
        self.rows()
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.mul_vec(v)
    }

    fn norm_inf(&self) -> f64 {
        DenseMatrix::norm_inf(self)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    /// Square `n×n` matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros dropped.
    pub fn from_triplets(n: usize, mut triplets: Vec<(usize, usize, C64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = triplets.iter().find(|(i, j, _)| *i >= n || *j >= n) {
            return Err(LinalgError::Shape(format!("entry ({i}, {j}) outside a {n}x{n} matrix")));
        }
        if let Some(&(row, col, _)) = triplets.iter().find(|(_, _, z)| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite { row, col });
        }
        triplets.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut merged: Vec<(usize, usize, C64)> = Vec::with_capacity(triplets.len());
        for (i, j, z) in triplets {
            match merged.last_mut() {
                Some(last) if last.0 == i && last.1 == j => last.2 += z,
                _ => merged.push((i, j, z)),
            }
        }
        merged.retain(|t| t.2 != ZERO);
        let mut row_ptr = vec![0; n + 1];
        for &(i, _, _) in &merged {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        let col_idx = merged.iter().map(|t| t.1).collect();
        let values = merged.iter().map(|t| t.2).collect();
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn from_dense(m: &DenseMatrix) -> Result<Self> {
        let n = m.require_square("SparseMatrix::from_dense")?;
        let mut t = Vec::new();
        for j in 0..n {
            for (i, &z) in m.column(j).iter().enumerate() {
                if z != ZERO {
                    t.push((i, j, z));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |k| (i, self.col_idx[k], self.values[k]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(k) => self.values[range.start + k],
            Err(_) => ZERO,
        }
    }

    pub fn mul_vec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.n, "sparse mul_vec: length mismatch");
        (0..self.n)
            .map(|i| {
                (self.row_ptr[i]..self.row_ptr[i + 1])
                    .map(|k| self.values[k] * v[self.col_idx[k]])
                    .sum()
            })
            .collect()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut m = DenseMatrix::zeros(self.n, self.n);
        for (i, j, z) in self.entries() {
            m[(i, j)] = z;
        }
        m
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        let mut sums = vec![0.0; self.n];
        for (&j, z) in self.col_idx.iter().zip(&self.values) {
            sums[j] += z.norm();
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.values.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

impl LinearOperator for SparseMatrix {
    fn size(&self) -> usize {
        self.n
    }

    fn apply(&self, v: &[C64]) -> Vec<C64> {
        self.mul_vec(v)
    }

    fn norm_inf(&self) -> f64 {
        (0..self.n)
            .map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}
