//! Dense complex linear algebra.
//!
//! Everything in the crate that is an operator, a superoperator or a density
//! matrix is a [`DenseMatrix`]. Storage is **column-major**: entry `(i, j)`
//! lives at `data[i + j * rows]`. Because of that, column-stacking
//! vectorization `vec(ρ)` is the raw data buffer, and `XρY ↦ (Yᵀ ⊗ X) vec(ρ)`
//! is the superoperator identity used throughout.

mod eig;
mod expm;
mod lu;
mod sparse;
mod svd;

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub, SubAssign};

use num_complex::Complex64;
use thiserror::Error;

pub use eig::{eig_general, eigh, EigenSystem, HermitianEigen};
#[cfg(test)]
pub(crate) use eig::orthonormalize;
pub use expm::{expm, expm_action, KrylovOptions};
pub use lu::{det, solve};
pub use sparse::{LinearOperator, SparseMatrix};
pub use svd::{null_space, singular_values};

pub type C64 = Complex64;

/// Largest matrix side accepted by [`kron`]: the superoperator of seven qubits.
pub const MAX_DIM: usize = 16_384;

/// Default kernel tolerance, relative to the matrix 1-norm.
pub const DEFAULT_KERNEL_TOL: f64 = 1e-10;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);
pub(crate) const I: C64 = C64::new(0.0, 1.0);

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinalgError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("dimension {requested} exceeds capacity {limit}")]
    Capacity { requested: usize, limit: usize },
    #[error("non-finite entry at ({row}, {col})")]
    NonFinite { row: usize, col: usize },
    #[error("{algorithm} did not converge after {iterations} iterations")]
    NoConvergence {
        algorithm: &'static str,
        iterations: usize,
    },
    #[error("matrix is singular to working precision")]
    Singular,
}

pub type Result<T> = std::result::Result<T, LinalgError>;

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i + i * n] = ONE;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    /// Builds a matrix from user data in column-major order, rejecting NaN/Inf.
    pub fn from_column_major(rows: usize, cols: usize, data: Vec<C64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(LinalgError::Shape(format!(
                "dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(LinalgError::Shape(format!(
                "{} entries for a {rows}x{cols} matrix",
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(LinalgError::NonFinite {
                row: k % rows,
                col: k / rows,
            });
        }
        Ok(Self { rows, cols, data })
    }

    /// Builds a matrix from a list of rows (the natural reading order).
    pub fn from_rows<R: AsRef<[C64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != ncols) {
            return Err(LinalgError::Shape("ragged rows".into()));
        }
        let mut data = Vec::with_capacity(nrows * ncols);
        for j in 0..ncols {
            for r in rows {
                data.push(r.as_ref()[j]);
            }
        }
        Self::from_column_major(nrows, ncols, data)
    }

    pub fn from_real_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.as_ref().iter().map(|&x| C64::new(x, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = Self::zeros(n, n);
        for (i, &z) in entries.iter().enumerate() {
            m.data[i + i * n] = z;
        }
        m
    }

    pub fn real_diag(entries: &[f64]) -> Self {
        let c: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::diag(&c)
    }

    /// Outer product `|a⟩⟨b|`.
    pub fn outer(a: &[C64], b: &[C64]) -> Self {
        Self::from_fn(a.len(), b.len(), |i, j| a[i] * b[j].conj())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn dim(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<C64> {
        self.data
    }

    pub fn column(&self, j: usize) -> &[C64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Column-stacking vectorization.
    pub fn vectorize(&self) -> Vec<C64> {
        self.data.clone()
    }

    /// Inverse of [`vectorize`](Self::vectorize) for a square `n×n` matrix.
    pub fn unvectorize(v: &[C64], n: usize) -> Result<Self> {
        if v.len() != n * n {
            return Err(LinalgError::Shape(format!(
                "vector of length {} is not a {n}x{n} matrix",
                v.len()
            )));
        }
        Ok(Self {
            rows: n,
            cols: n,
            data: v.to_vec(),
        })
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn conj(&self) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    pub fn scale(&self, s: C64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&z| z * s).collect(),
        }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(C64::new(s, 0.0))
    }

    pub fn trace(&self) -> C64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Maximum absolute column sum.
    pub fn norm_one(&self) -> f64 {
        (0..self.cols)
            .map(|j| self.column(j).iter().map(|z| z.norm()).sum::<f64>())
            .fold(0.0, f64::max)
    }

    /// Maximum absolute row sum.
    pub fn norm_inf(&self) -> f64 {
        let mut sums = vec![0.0; self.rows];
        for j in 0..self.cols {
            for (i, z) in self.column(j).iter().enumerate() {
                sums[i] += z.norm();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn norm_max(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn norm_fro(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// `max |A - A†|`, zero for Hermitian matrices.
    pub fn hermitian_defect(&self) -> f64 {
        if !self.is_square() {
            return f64::INFINITY;
        }
        let n = self.rows;
        let mut worst: f64 = 0.0;
        for j in 0..n {
            for i in 0..=j {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    /// `(A + A†)/2`.
    pub fn hermitian_part(&self) -> Self {
        let adj = self.adjoint();
        (self + &adj).scale_real(0.5)
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul: {}x{} times {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = Self::zeros(self.rows, rhs.cols);
        let m = self.rows;
        for j in 0..rhs.cols {
            let dst = &mut out.data[j * m..(j + 1) * m];
            for (k, &b) in rhs.column(j).iter().enumerate() {
                if b == ZERO {
                    continue;
                }
                axpy(b, self.column(k), dst);
            }
        }
        out
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(self.cols, x.len(), "mul_vec: dimension mismatch");
        let mut y = vec![ZERO; self.rows];
        for (j, &xj) in x.iter().enumerate() {
            if xj == ZERO {
                continue;
            }
            axpy(xj, self.column(j), &mut y);
        }
        y
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &self.matmul(other) - &other.matmul(self)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub(crate) fn require_square(&self, what: &str) -> Result<usize> {
        if self.is_square() {
            Ok(self.rows)
        } else {
            Err(LinalgError::Shape(format!(
                "{what} needs a square matrix, got {}x{}",
                self.rows, self.cols
            )))
        }
    }
}

#[inline]
pub(crate) fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub(crate) fn dot_conj(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

pub(crate) fn vec_norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Kronecker product; `(i·rows_b + k, j·cols_b + l)` holds `a[i,j]·b[k,l]`.
pub fn kron(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let rows = a.rows.checked_mul(b.rows).ok_or(LinalgError::Capacity {
        requested: usize::MAX,
        limit: MAX_DIM,
    })?;
    let cols = a.cols.checked_mul(b.cols).ok_or(LinalgError::Capacity {
        requested: usize::MAX,
        limit: MAX_DIM,
    })?;
    if rows > MAX_DIM || cols > MAX_DIM {
        return Err(LinalgError::Capacity {
            requested: rows.max(cols),
            limit: MAX_DIM,
        });
    }
    let mut out = DenseMatrix::zeros(rows, cols);
    for j in 0..a.cols {
        for i in 0..a.rows {
            let aij = a[(i, j)];
            if aij == ZERO {
                continue;
            }
            for l in 0..b.cols {
                let dst_col = j * b.cols + l;
                let base = dst_col * rows + i * b.rows;
                for (k, &bkl) in b.column(l).iter().enumerate() {
                    out.data[base + k] = aij * bkl;
                }
            }
        }
    }
    Ok(out)
}

/// Kronecker product of a list of factors, left to right.
pub fn kron_all(factors: &[&DenseMatrix]) -> Result<DenseMatrix> {
    let mut it = factors.iter();
    let first = it
        .next()
        .ok_or_else(|| LinalgError::Shape("empty Kronecker product".into()))?;
    it.try_fold((*first).clone(), |acc, m| kron(&acc, m))
}

/// Partial trace of `rho` over every subsystem not listed in `keep`.
///
/// `dims` lists the subsystem dimensions in tensor order (first factor is the
/// most significant index). The kept subsystems stay in their original order.
pub fn partial_trace(rho: &DenseMatrix, keep: &[usize], dims: &[usize]) -> Result<DenseMatrix> {
    let n = rho.require_square("partial_trace")?;
    let total: usize = dims.iter().product();
    if total != n || dims.is_empty() {
        return Err(LinalgError::Shape(format!(
            "subsystem dims {dims:?} do not multiply to {n}"
        )));
    }
    let mut keep_sorted = keep.to_vec();
    keep_sorted.sort_unstable();
    keep_sorted.dedup();
    if keep_sorted.len() != keep.len() || keep_sorted.iter().any(|&k| k >= dims.len()) {
        return Err(LinalgError::Shape(format!(
            "invalid kept subsystems {keep:?} for {} factors",
            dims.len()
        )));
    }
    let traced: Vec<usize> = (0..dims.len()).filter(|k| !keep_sorted.contains(k)).collect();
    let kept_dim: usize = keep_sorted.iter().map(|&k| dims[k]).product();
    let traced_dim: usize = traced.iter().map(|&k| dims[k]).product();

    // strides of each factor in the full index
    let mut strides = vec![1usize; dims.len()];
    for k in (0..dims.len().saturating_sub(1)).rev() {
        strides[k] = strides[k + 1] * dims[k + 1];
    }
    let offsets = |subset: &[usize], mut idx: usize| -> usize {
        let mut off = 0;
        for &k in subset.iter().rev() {
            off += (idx % dims[k]) * strides[k];
            idx /= dims[k];
        }
        off
    };
    let kept_off: Vec<usize> = (0..kept_dim).map(|a| offsets(&keep_sorted, a)).collect();
    let traced_off: Vec<usize> = (0..traced_dim).map(|t| offsets(&traced, t)).collect();

    Ok(DenseMatrix::from_fn(kept_dim, kept_dim, |a, b| {
        traced_off
            .iter()
            .map(|&t| rho[(kept_off[a] + t, kept_off[b] + t)])
            .sum()
    }))
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = C64;

    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i + j * self.rows]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i + j * self.rows]
    }
}

impl Add for &DenseMatrix {
    type Output = DenseMatrix;

    fn add(self, rhs: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl Sub for &DenseMatrix {
    type Output = DenseMatrix;

    fn sub(self, rhs: &DenseMatrix) -> DenseMatrix {
        let mut out = self.clone();
        out -= rhs;
        out
    }
}

impl AddAssign<&DenseMatrix> for DenseMatrix {
    fn add_assign(&mut self, rhs: &DenseMatrix) {
        assert_eq!(self.dim(), rhs.dim(), "add: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&DenseMatrix> for DenseMatrix {
    fn sub_assign(&mut self, rhs: &DenseMatrix) {
        assert_eq!(self.dim(), rhs.dim(), "sub: shape mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}

impl Mul for &DenseMatrix {
    type Output = DenseMatrix;

    fn mul(self, rhs: &DenseMatrix) -> DenseMatrix {
        self.matmul(rhs)
    }
}

impl Neg for &DenseMatrix {
    type Output = DenseMatrix;

    fn neg(self) -> DenseMatrix {
        self.scale_real(-1.0)
    }
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:>10.4}{:+.4}i ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn sigma_z() -> DenseMatrix {
        DenseMatrix::real_diag(&[1.0, -1.0])
    }

    #[test]
    fn kron_identities() {
        let i2 = DenseMatrix::identity(2);
        assert_eq!(kron(&i2, &i2).unwrap(), DenseMatrix::identity(4));
        let zi = kron(&sigma_z(), &i2).unwrap();
        assert_eq!(zi, DenseMatrix::real_diag(&[1.0, 1.0, -1.0, -1.0]));
    }

    #[test]
    fn kron_matches_index_formula() {
        let sp = DenseMatrix::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap();
        let a = DenseMatrix::from_fn(2, 3, |i, j| C64::new(i as f64 + 1.0, j as f64 - 0.5));
        for (x, y) in [(&sp, &sp.adjoint()), (&a, &sp), (&sp, &a)] {
            let k = kron(x, y).unwrap();
            assert_eq!(k.dim(), (x.rows() * y.rows(), x.cols() * y.cols()));
            for i in 0..x.rows() {
                for j in 0..x.cols() {
                    for p in 0..y.rows() {
                        for q in 0..y.cols() {
                            assert_eq!(k[(i * y.rows() + p, j * y.cols() + q)], x[(i, j)] * y[(p, q)]);
                        }
                    }
                }
            }
        }
    }

    #[test]
    fn kron_rejects_oversized_result() {
        let big = DenseMatrix::identity(200);
        assert!(matches!(
            kron(&big, &big),
            Err(LinalgError::Capacity { requested: 40_000, .. })
        ));
    }

    #[test]
    fn construction_rejects_nan() {
        let err = DenseMatrix::from_column_major(2, 1, vec![c(1.0), C64::new(f64::NAN, 0.0)]);
        assert_eq!(err, Err(LinalgError::NonFinite { row: 1, col: 0 }));
        assert!(DenseMatrix::from_column_major(2, 2, vec![c(1.0)]).is_err());
    }

    #[test]
    fn column_stacking_identity() {
        let x = DenseMatrix::from_fn(3, 3, |i, j| C64::new(i as f64 - j as f64, (i * j) as f64));
        let rho = DenseMatrix::from_fn(3, 3, |i, j| C64::new(1.0 + i as f64, j as f64 * 0.3));
        let y = DenseMatrix::from_fn(3, 3, |i, j| C64::new((i + 2 * j) as f64, -1.0));
        let lhs = (&(&x * &rho) * &y).vectorize();
        let rhs = kron(&y.transpose(), &x).unwrap().mul_vec(&rho.vectorize());
        for (a, b) in lhs.iter().zip(&rhs) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn partial_trace_of_singlet_is_maximally_mixed() {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [c(0.0), c(s), c(-s), c(0.0)];
        let rho = DenseMatrix::outer(&psi, &psi);
        for keep in [0, 1] {
            let r = partial_trace(&rho, &[keep], &[2, 2]).unwrap();
            let diff = &r - &DenseMatrix::identity(2).scale_real(0.5);
            assert!(diff.norm_max() < 1e-15);
        }
    }

    #[test]
    fn partial_trace_of_product() {
        let a = DenseMatrix::from_real_rows(&[[0.7, 0.1], [0.1, 0.3]]).unwrap();
        let b = DenseMatrix::from_rows(&[
            [c(0.5), C64::new(0.0, 0.2), c(0.0)],
            [C64::new(0.0, -0.2), c(0.25), c(0.0)],
            [c(0.0), c(0.0), c(0.25)],
        ])
        .unwrap();
        let ab = kron(&a, &b).unwrap();
        assert!((&partial_trace(&ab, &[0], &[2, 3]).unwrap() - &a).norm_max() < 1e-15);
        assert!((&partial_trace(&ab, &[1], &[2, 3]).unwrap() - &b).norm_max() < 1e-15);
        assert!(partial_trace(&ab, &[0], &[2, 2]).is_err());
        assert!(partial_trace(&ab, &[2], &[2, 3]).is_err());
    }
}
