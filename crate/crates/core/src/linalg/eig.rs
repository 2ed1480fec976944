//! Eigenvalue problems.
//!
//! General matrices go through Householder reduction to Hessenberg form
//! followed by single-shift complex QR (Wilkinson shifts, Givens bulge
//! chasing) down to a complex Schur form `A = Z T Z†`. Right eigenvectors are
//! recovered from `T` by back substitution. Hermitian matrices use cyclic
//! Jacobi rotations, which keep small eigenvalues accurate.

#[cfg(test)]
use super::dot_conj;
use super::{vec_norm, DenseMatrix, LinalgError, Result, C64, ONE, ZERO};

const MAX_ITER_PER_EIGENVALUE: usize = 40;
const MAX_JACOBI_SWEEPS: usize = 100;

#[derive(Debug, Clone)]
pub struct EigenSystem {
    pub values: Vec<C64>,
    /// Right eigenvectors as unit-norm columns, in the order of `values`.
    pub vectors: Option<DenseMatrix>,
    /// Relative residual bound the decomposition is expected to meet:
    /// `‖Av − λv‖ ≤ tol · ‖A‖₁`.
    pub tol: f64,
    /// Total QR sweeps spent.
    pub iterations: usize,
}

impl EigenSystem {
    /// `‖A v_k − λ_k v_k‖₂` for the `k`-th pair, if vectors were computed.
    pub fn residual(&self, a: &DenseMatrix, k: usize) -> Option<f64> {
        let vecs = self.vectors.as_ref()?;
        let v = vecs.column(k);
        let av = a.mul_vec(v);
        Some(
            av.iter()
                .zip(v)
                .map(|(x, y)| (x - self.values[k] * y).norm_sqr())
                .sum::<f64>()
                .sqrt(),
        )
    }
}

#[derive(Debug, Clone)]
pub struct HermitianEigen {
    /// Ascending.
    pub values: Vec<f64>,
    pub vectors: DenseMatrix,
}

/// Eigenvalues (and optionally right eigenvectors) of a general square
/// complex matrix.
pub fn eig_general(a: &DenseMatrix, want_vectors: bool) -> Result<EigenSystem> {
    let n = a.require_square("eig_general")?;
    if !a.is_finite() {
        return Err(LinalgError::Shape("eig_general: non-finite input".into()));
    }
    let tol = 1e3 * f64::EPSILON * n.max(1) as f64;
    if n == 1 {
        return Ok(EigenSystem {
            values: vec![a[(0, 0)]],
            vectors: want_vectors.then(|| DenseMatrix::identity(1)),
            tol,
            iterations: 0,
        });
    }
    let mut h = a.clone();
    let mut z = want_vectors.then(|| DenseMatrix::identity(n));
    hessenberg(&mut h, z.as_mut());
    let iterations = schur_qr(&mut h, z.as_mut(), want_vectors)?;
    let values: Vec<C64> = (0..n).map(|i| h[(i, i)]).collect();
    let vectors = z.map(|z| triangular_eigenvectors(&h, &z));
    Ok(EigenSystem {
        values,
        vectors,
        tol,
        iterations,
    })
}

fn hessenberg(h: &mut DenseMatrix, mut z: Option<&mut DenseMatrix>) {
    let n = h.rows();
    let mut v = vec![ZERO; n];
    for k in 0..n.saturating_sub(2) {
        let len = n - k - 1;
        let x: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = vec_norm(&x);
        if xnorm == 0.0 {
            continue;
        }
        let phase = if x[0].norm() > 0.0 { x[0] / x[0].norm() } else { ONE };
        let alpha = -phase * xnorm;
        v[..len].copy_from_slice(&x);
        v[0] -= alpha;
        let vnorm = vec_norm(&v[..len]);
        if vnorm == 0.0 {
            continue;
        }
        for vi in v[..len].iter_mut() {
            *vi /= vnorm;
        }
        let v = &v[..len];
        // H <- P H, P = I - 2 v v†
        for j in k..n {
            let s: C64 = (0..len).map(|r| v[r].conj() * h[(k + 1 + r, j)]).sum::<C64>() * 2.0;
            for r in 0..len {
                h[(k + 1 + r, j)] -= v[r] * s;
            }
        }
        // H <- H P
        apply_reflector_right(h, v, k + 1);
        if let Some(z) = z.as_deref_mut() {
            apply_reflector_right(z, v, k + 1);
        }
        for i in k + 2..n {
            h[(i, k)] = ZERO;
        }
    }
}

fn apply_reflector_right(m: &mut DenseMatrix, v: &[C64], offset: usize) {
    let rows = m.rows();
    let mut s = vec![ZERO; rows];
    for (r, &vr) in v.iter().enumerate() {
        for (i, &x) in m.column(offset + r).iter().enumerate() {
            s[i] += x * vr;
        }
    }
    for (r, &vr) in v.iter().enumerate() {
        let f = vr.conj() * 2.0;
        let col = offset + r;
        for i in 0..rows {
            m[(i, col)] -= s[i] * f;
        }
    }
}

/// Rotation `[[c, s], [-s̄, c]]` that maps `(x, y)` to `(r, 0)`.
fn givens(x: C64, y: C64) -> (f64, C64) {
    if y == ZERO {
        return (1.0, ZERO);
    }
    if x == ZERO {
        return (0.0, y.conj() / y.norm());
    }
    let r = x.norm().hypot(y.norm());
    let c = x.norm() / r;
    let s = (x / x.norm()) * y.conj() / r;
    (c, s)
}

fn schur_qr(h: &mut DenseMatrix, mut z: Option<&mut DenseMatrix>, full: bool) -> Result<usize> {
    let n = h.rows();
    let eps = f64::EPSILON;
    let scale = h.norm_one().max(f64::MIN_POSITIVE);
    let mut hi = n - 1;
    let mut iter_here = 0usize;
    let mut total = 0usize;
    let limit = MAX_ITER_PER_EIGENVALUE * n;

    while hi > 0 {
        let mut l = hi;
        while l > 0 {
            let mut s = h[(l - 1, l - 1)].norm() + h[(l, l)].norm();
            if s == 0.0 {
                s = scale;
            }
            if h[(l, l - 1)].norm() <= eps * s {
                h[(l, l - 1)] = ZERO;
                break;
            }
            l -= 1;
        }
        if l == hi {
            hi -= 1;
            iter_here = 0;
            continue;
        }
        iter_here += 1;
        total += 1;
        if total > limit {
            return Err(LinalgError::NoConvergence {
                algorithm: "complex QR",
                iterations: total,
            });
        }

        let shift = if iter_here % 11 == 10 {
            h[(hi, hi)] + h[(hi, hi - 1)].norm() * 0.75
        } else {
            let a = h[(hi - 1, hi - 1)];
            let b = h[(hi - 1, hi)];
            let c = h[(hi, hi - 1)];
            let d = h[(hi, hi)];
            let half = (a - d) * 0.5;
            let disc = (half * half + b * c).sqrt();
            let mid = (a + d) * 0.5;
            let (e1, e2) = (mid + disc, mid - disc);
            if (e1 - d).norm() <= (e2 - d).norm() {
                e1
            } else {
                e2
            }
        };

        let col_end = if full { n } else { hi + 1 };
        let row_start = if full { 0 } else { l };
        for k in l..hi {
            let (x, y) = if k == l {
                (h[(l, l)] - shift, h[(l + 1, l)])
            } else {
                (h[(k, k - 1)], h[(k + 1, k - 1)])
            };
            let (c, s) = givens(x, y);
            let first_col = if k == l { l } else { k - 1 };
            for j in first_col..col_end {
                let t1 = h[(k, j)];
                let t2 = h[(k + 1, j)];
                h[(k, j)] = t1 * c + s * t2;
                h[(k + 1, j)] = -s.conj() * t1 + t2 * c;
            }
            let last_row = (k + 2).min(hi);
            for i in row_start..=last_row {
                let t1 = h[(i, k)];
                let t2 = h[(i, k + 1)];
                h[(i, k)] = t1 * c + s.conj() * t2;
                h[(i, k + 1)] = -s * t1 + t2 * c;
            }
            if let Some(z) = z.as_deref_mut() {
                for i in 0..n {
                    let t1 = z[(i, k)];
                    let t2 = z[(i, k + 1)];
                    z[(i, k)] = t1 * c + s.conj() * t2;
                    z[(i, k + 1)] = -s * t1 + t2 * c;
                }
            }
            if k > l {
                h[(k + 1, k - 1)] = ZERO;
            }
        }
    }
    Ok(total)
}

fn triangular_eigenvectors(t: &DenseMatrix, z: &DenseMatrix) -> DenseMatrix {
    let n = t.rows();
    let smin = (f64::EPSILON * t.norm_one()).max(f64::MIN_POSITIVE * 1e10);
    let mut out = DenseMatrix::zeros(n, n);
    let mut x = vec![ZERO; n];
    for k in 0..n {
        x.iter_mut().for_each(|v| *v = ZERO);
        x[k] = ONE;
        let lambda = t[(k, k)];
        for i in (0..k).rev() {
            let mut s = ZERO;
            for j in i + 1..=k {
                s += t[(i, j)] * x[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smin {
                d = C64::new(smin, 0.0);
            }
            x[i] = -s / d;
            let big = x[i].norm();
            if big > 1e100 {
                for v in x[..=k].iter_mut() {
                    *v /= big;
                }
            }
        }
        let v = z.mul_vec(&x);
        let norm = vec_norm(&v);
        for (i, vi) in v.into_iter().enumerate() {
            out[(i, k)] = vi / norm;
        }
    }
    out
}

/// Eigen-decomposition of a Hermitian matrix by cyclic Jacobi rotations.
///
/// Only the Hermitian part of `a` is used.
pub fn eigh(a: &DenseMatrix) -> Result<HermitianEigen> {
    let n = a.require_square("eigh")?;
    let mut m = a.hermitian_part();
    let mut v = DenseMatrix::identity(n);
    let total = m.norm_fro();
    let target = f64::EPSILON * total;

    let off = |m: &DenseMatrix| -> f64 {
        let mut s = 0.0;
        for j in 0..n {
            for i in 0..j {
                s += m[(i, j)].norm_sqr();
            }
        }
        (2.0 * s).sqrt()
    };

    let mut sweeps = 0;
    while off(&m) > target {
        sweeps += 1;
        if sweeps > MAX_JACOBI_SWEEPS {
            return Err(LinalgError::NoConvergence {
                algorithm: "Hermitian Jacobi",
                iterations: sweeps,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = m[(p, q)];
                if apq.norm() <= f64::MIN_POSITIVE {
                    continue;
                }
                let (g_pp, g_pq, g_qp, g_qq) = jacobi_rotation(m[(p, p)].re, m[(q, q)].re, apq);
                rotate(&mut m, &mut v, p, q, g_pp, g_pq, g_qp, g_qq);
            }
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| m[(i, i)].re.total_cmp(&m[(j, j)].re));
    let values = order.iter().map(|&i| m[(i, i)].re).collect();
    let vectors = DenseMatrix::from_fn(n, n, |i, k| v[(i, order[k])]);
    Ok(HermitianEigen { values, vectors })
}

/// Unitary `G` (entries `g_pp, g_pq, g_qp, g_qq`) with `G† [[a, b], [b̄, d]] G` diagonal.
pub(super) fn jacobi_rotation(a: f64, d: f64, b: C64) -> (C64, C64, C64, C64) {
    let bn = b.norm();
    let phase = b / bn;
    let tau = (d - a) / (2.0 * bn);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let ph = phase.conj();
    (C64::new(c, 0.0), C64::new(s, 0.0), -ph * s, ph * c)
}

#[allow(clippy::too_many_arguments)]
fn rotate(m: &mut DenseMatrix, v: &mut DenseMatrix, p: usize, q: usize, gpp: C64, gpq: C64, gqp: C64, gqq: C64) {
    let n = m.rows();
    for k in 0..n {
        let mp = m[(k, p)];
        let mq = m[(k, q)];
        m[(k, p)] = mp * gpp + mq * gqp;
        m[(k, q)] = mp * gpq + mq * gqq;
    }
    for k in 0..n {
        let mp = m[(p, k)];
        let mq = m[(q, k)];
        m[(p, k)] = gpp.conj() * mp + gqp.conj() * mq;
        m[(q, k)] = gpq.conj() * mp + gqq.conj() * mq;
    }
    m[(p, q)] = ZERO;
    m[(q, p)] = ZERO;
    m[(p, p)].im = 0.0;
    m[(q, q)].im = 0.0;
    for k in 0..n {
        let vp = v[(k, p)];
        let vq = v[(k, q)];
        v[(k, p)] = vp * gpp + vq * gqp;
        v[(k, q)] = vp * gpq + vq * gqq;
    }
}

/// Gram–Schmidt orthonormalization of a set of vectors, dropping any that
/// fall below `drop_tol` after projection.
#[cfg(test)]
pub(crate) fn orthonormalize(vectors: Vec<Vec<C64>>, drop_tol: f64) -> Vec<Vec<C64>> {
    let mut basis: Vec<Vec<C64>> = Vec::with_capacity(vectors.len());
    for mut v in vectors {
        for _ in 0..2 {
            for b in &basis {
                let c = dot_conj(b, &v);
                for (vi, bi) in v.iter_mut().zip(b) {
                    *vi -= c * bi;
                }
            }
        }
        let norm = vec_norm(&v);
        if norm > drop_tol {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}
