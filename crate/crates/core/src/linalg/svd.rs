//! One-sided (Hestenes) Jacobi SVD. Slow but accurate for small singular
//! values, which is what kernel extraction needs.

use super::eig::jacobi_rotation;
use super::{dot_conj, DenseMatrix, LinalgError, Result, C64};

const MAX_SWEEPS: usize = 60;

/// Returns `(σ, V)` with `A V` having mutually orthogonal columns of norm `σ_j`.
fn jacobi_svd(a: &DenseMatrix) -> Result<(Vec<f64>, DenseMatrix)> {
    let n = a.cols();
    let mut w = a.clone();
    let mut v = DenseMatrix::identity(n);
    let eps = f64::EPSILON;
    for sweep in 0.. {
        if sweep >= MAX_SWEEPS {
            return Err(LinalgError::NoConvergence {
                algorithm: "one-sided Jacobi SVD",
                iterations: sweep,
            });
        }
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha: f64 = w.column(p).iter().map(|z| z.norm_sqr()).sum();
                let beta: f64 = w.column(q).iter().map(|z| z.norm_sqr()).sum();
                let gamma = dot_conj(w.column(p), w.column(q));
                if gamma.norm() <= eps * (alpha * beta).sqrt() || gamma.norm() < f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let (gpp, gpq, gqp, gqq) = jacobi_rotation(alpha, beta, gamma);
                rotate_columns(&mut w, p, q, gpp, gpq, gqp, gqq);
                rotate_columns(&mut v, p, q, gpp, gpq, gqp, gqq);
            }
        }
        if !rotated {
            break;
        }
    }
    let sigma = (0..n)
        .map(|j| w.column(j).iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt())
        .collect();
    Ok((sigma, v))
}

fn rotate_columns(m: &mut DenseMatrix, p: usize, q: usize, gpp: C64, gpq: C64, gqp: C64, gqq: C64) {
    for k in 0..m.rows() {
        let mp = m[(k, p)];
        let mq = m[(k, q)];
        m[(k, p)] = mp * gpp + mq * gqp;
        m[(k, q)] = mp * gpq + mq * gqq;
    }
}

/// Singular values in descending order.
pub fn singular_values(a: &DenseMatrix) -> Result<Vec<f64>> {
    let (mut s, _) = jacobi_svd(a)?;
    s.sort_by(|x, y| y.total_cmp(x));
    Ok(s)
}

/// Orthonormal basis of `{v : ‖A v‖ ≤ tol · ‖A‖₁}`.
///
/// An empty result means no kernel was found at this tolerance.
pub fn null_space(a: &DenseMatrix, tol: f64) -> Result<Vec<Vec<C64>>> {
    a.require_square("null_space")?;
    let threshold = tol * a.norm_one();
    let (sigma, v) = jacobi_svd(a)?;
    let mut idx: Vec<usize> = (0..sigma.len()).filter(|&j| sigma[j] <= threshold).collect();
    idx.sort_by(|&i, &j| sigma[i].total_cmp(&sigma[j]));
    Ok(idx.into_iter().map(|j| v.column(j).to_vec()).collect())
}
