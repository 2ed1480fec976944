use super::{DenseMatrix, LinalgError, Result, C64, ONE, ZERO};

/// LU factorization with partial pivoting, stored in place.
struct Lu {
    lu: DenseMatrix,
    perm: Vec<usize>,
    sign: f64,
    singular: bool,
}

fn factor(a: &DenseMatrix) -> Result<Lu> {
    let n = a.require_square("LU")?;
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let mut sign = 1.0;
    let mut singular = false;
    for k in 0..n {
        let (p, pmax) = (k..n)
            .map(|i| (i, lu[(i, k)].norm()))
            .fold((k, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        if pmax == 0.0 {
            singular = true;
            continue;
        }
        if p != k {
            for j in 0..n {
                let tmp = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = tmp;
            }
            perm.swap(k, p);
            sign = -sign;
        }
        let pivot = lu[(k, k)];
        for i in k + 1..n {
            lu[(i, k)] /= pivot;
        }
        for j in k + 1..n {
            let ukj = lu[(k, j)];
            if ukj == ZERO {
                continue;
            }
            for i in k + 1..n {
                let lik = lu[(i, k)];
                lu[(i, j)] -= lik * ukj;
            }
        }
    }
    Ok(Lu {
        lu,
        perm,
        sign,
        singular,
    })
}

/// Solves `A X = B` by LU with partial pivoting.
pub fn solve(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    let f = factor(a)?;
    let n = a.rows();
    if b.rows() != n {
        return Err(LinalgError::Shape(format!(
            "solve: {n}x{n} system with {} right-hand-side rows",
            b.rows()
        )));
    }
    if f.singular {
        return Err(LinalgError::Singular);
    }
    let mut x = DenseMatrix::zeros(n, b.cols());
    let mut col = vec![ZERO; n];
    for j in 0..b.cols() {
        for i in 0..n {
            col[i] = b[(f.perm[i], j)];
        }
        for i in 0..n {
            let mut s = col[i];
            for k in 0..i {
                s -= f.lu[(i, k)] * col[k];
            }
            col[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = col[i];
            for k in i + 1..n {
                s -= f.lu[(i, k)] * col[k];
            }
            col[i] = s / f.lu[(i, i)];
        }
        for i in 0..n {
            x[(i, j)] = col[i];
        }
    }
    Ok(x)
}

pub fn det(a: &DenseMatrix) -> Result<C64> {
    let f = factor(a)?;
    if f.singular {
        return Ok(ZERO);
    }
    Ok((0..a.rows()).fold(ONE * f.sign, |acc, i| acc * f.lu[(i, i)]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        let a = DenseMatrix::from_real_rows(&[[0.0, 2.0, 1.0], [1.0, 1.0, 0.0], [3.0, 0.0, 1.0]])
            .unwrap();
        let x = DenseMatrix::from_real_rows(&[[1.0], [-2.0], [0.5]]).unwrap();
        let b = &a * &x;
        let sol = solve(&a, &b).unwrap();
        assert!((&sol - &x).norm_max() < 1e-14);
        // det = 0*(1) - 2*(1-0) + 1*(0-3) = -5
        assert!((det(&a).unwrap() - C64::new(-5.0, 0.0)).norm() < 1e-14);
    }

    #[test]
    fn singular_is_reported() {
        let a = DenseMatrix::from_real_rows(&[[1.0, 2.0], [2.0, 4.0]]).unwrap();
        assert_eq!(det(&a).unwrap(), ZERO);
        assert_eq!(
            solve(&a, &DenseMatrix::identity(2)),
            Err(LinalgError::Singular)
        );
    }
}
