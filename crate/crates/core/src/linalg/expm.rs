//! Matrix exponential.
//!
//! [`expm`] is the scaling-and-squaring Padé scheme of degree 3..13 with the
//! backward-error thresholds of Higham (2005). [`expm_action`] computes
//! `exp(tA) v` without forming `exp(tA)`: an adaptive Krylov (Arnoldi)
//! time-stepper in the style of Expokit, used for superoperators too large to
//! exponentiate densely.

use super::{dot_conj, solve, vec_norm, DenseMatrix, LinalgError, LinearOperator, Result, C64, ZERO};

const THETA: [(usize, f64); 4] = [
    (3, 1.495_585_217_958_292e-2),
    (5, 2.539_398_330_063_23e-1),
    (7, 9.504_178_996_162_932e-1),
    (9, 2.097_847_961_257_068),
];
const THETA_13: f64 = 5.371_920_351_148_152;

const PADE_3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE_5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE_7: [f64; 8] = [
    17_297_280.0,
    8_648_640.0,
    1_995_840.0,
    277_200.0,
    25_200.0,
    1_512.0,
    56.0,
    1.0,
];
const PADE_9: [f64; 10] = [
    17_643_225_600.0,
    8_821_612_800.0,
    2_075_673_600.0,
    302_702_400.0,
    30_270_240.0,
    2_162_160.0,
    110_880.0,
    3_960.0,
    90.0,
    1.0,
];
const PADE_13: [f64; 14] = [
    64_764_752_532_480_000.0,
    32_382_376_266_240_000.0,
    7_771_770_303_897_600.0,
    1_187_353_796_428_800.0,
    129_060_195_264_000.0,
    10_559_470_521_600.0,
    670_442_572_800.0,
    33_522_128_640.0,
    1_323_241_920.0,
    40_840_800.0,
    960_960.0,
    16_380.0,
    182.0,
    1.0,
];

fn lin_comb(terms: &[(f64, &DenseMatrix)], n: usize) -> DenseMatrix {
    let mut out = DenseMatrix::zeros(n, n);
    for (c, m) in terms {
        if *c == 0.0 {
            continue;
        }
        for (o, x) in out.as_mut_slice().iter_mut().zip(m.as_slice()) {
            *o += x * *c;
        }
    }
    out
}

fn add_identity(m: &mut DenseMatrix, c: f64) {
    for i in 0..m.rows() {
        m[(i, i)] += c;
    }
}

/// Padé approximant `r_m(A) = (V - U)^{-1}(V + U)` for a low degree `m`.
fn pade_low(a: &DenseMatrix, coeffs: &[f64]) -> Result<DenseMatrix> {
    let n = a.rows();
    let a2 = a * a;
    let mut powers = vec![DenseMatrix::identity(n), a2.clone()];
    while powers.len() * 2 < coeffs.len() {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let odd: Vec<(f64, &DenseMatrix)> = powers
        .iter()
        .enumerate()
        .map(|(k, p)| (coeffs[2 * k + 1], p))
        .collect();
    let even: Vec<(f64, &DenseMatrix)> = powers
        .iter()
        .enumerate()
        .map(|(k, p)| (coeffs[2 * k], p))
        .collect();
    let u = a * &lin_comb(&odd, n);
    let v = lin_comb(&even, n);
    solve(&(&v - &u), &(&v + &u))
}

fn pade_13(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.rows();
    let b = PADE_13;
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = lin_comb(&[(b[13], &a6), (b[11], &a4), (b[9], &a2)], n);
    let mut outer_u = lin_comb(&[(b[7], &a6), (b[5], &a4), (b[3], &a2)], n);
    add_identity(&mut outer_u, b[1]);
    let u = a * &(&(&a6 * &inner_u) + &outer_u);
    let inner_v = lin_comb(&[(b[12], &a6), (b[10], &a4), (b[8], &a2)], n);
    let mut outer_v = lin_comb(&[(b[6], &a6), (b[4], &a4), (b[2], &a2)], n);
    add_identity(&mut outer_v, b[0]);
    let v = &(&a6 * &inner_v) + &outer_v;
    solve(&(&v - &u), &(&v + &u))
}

/// Matrix exponential by scaling and squaring with a Padé approximant.
pub fn expm(a: &DenseMatrix) -> Result<DenseMatrix> {
    let n = a.require_square("expm")?;
    if !a.is_finite() {
        return Err(LinalgError::Shape("expm: non-finite input".into()));
    }
    let norm = a.norm_one();
    if norm == 0.0 {
        return Ok(DenseMatrix::identity(n));
    }
    for (m, theta) in THETA {
        if norm <= theta {
            let coeffs: &[f64] = match m {
                3 => &PADE_3,
                5 => &PADE_5,
                7 => &PADE_7,
                _ => &PADE_9,
            };
            return pade_low(a, coeffs);
        }
    }
    let s = (norm / THETA_13).log2().ceil().max(0.0) as i32;
    let scaled = a.scale_real(0.5f64.powi(s));
    let mut r = pade_13(&scaled)?;
    for _ in 0..s {
        r = &r * &r;
    }
    Ok(r)
}

#[derive(Debug, Clone, Copy)]
pub struct KrylovOptions {
    /// Arnoldi basis size per step.
    pub dim: usize,
    /// Local error tolerance per unit time, relative to `‖v‖`.
    pub tol: f64,
    pub max_rejections: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self {
            dim: 30,
            tol: 1e-12,
            max_rejections: 20,
        }
    }
}

fn round_step(t: f64) -> f64 {
    let s = 10f64.powf(t.log10().floor() - 1.0);
    (t / s).ceil() * s
}

/// `exp(t A) v` by adaptive Krylov stepping.
pub fn expm_action<A: LinearOperator + ?Sized>(a: &A, v: &[C64], t: f64, opts: KrylovOptions) -> Result<Vec<C64>> {
    let n = a.size();
    if v.len() != n {
        return Err(LinalgError::Shape(format!(
            "expm_action: vector of length {} for a {n}x{n} matrix",
            v.len()
        )));
    }
    let mut w = v.to_vec();
    let mut beta = vec_norm(&w);
    if t == 0.0 || beta == 0.0 {
        return Ok(w);
    }
    let anorm = LinearOperator::norm_inf(a).max(f64::MIN_POSITIVE);
    let m = opts.dim.min(n).max(1);
    let tol = opts.tol * beta;
    let btol = 1e-12 * anorm;
    let (gamma, delta) = (0.9, 1.2);
    let sgn = t.signum();
    let t_out = t.abs();

    let fact = ((m as f64 + 1.0) / std::f64::consts::E).powf(m as f64 + 1.0)
        * (2.0 * std::f64::consts::PI * (m as f64 + 1.0)).sqrt();
    let mut t_new = (1.0 / anorm) * ((fact * tol) / (4.0 * beta * anorm)).powf(1.0 / m as f64);
    t_new = round_step(t_new);
    let mut t_now = 0.0;
    let mut basis: Vec<Vec<C64>> = vec![vec![ZERO; n]; m + 1];

    while t_now < t_out {
        let mut t_step = (t_out - t_now).min(t_new);
        for (b, x) in basis[0].iter_mut().zip(&w) {
            *b = x / beta;
        }
        let mut h = DenseMatrix::zeros(m + 2, m + 2);
        let mut krylov_dim = m;
        let mut happy = false;
        for j in 0..m {
            let mut p = a.apply(&basis[j]);
            for i in 0..=j {
                let hij = dot_conj(&basis[i], &p);
                h[(i, j)] = hij;
                for (pk, bk) in p.iter_mut().zip(&basis[i]) {
                    *pk -= hij * bk;
                }
            }
            let s = vec_norm(&p);
            if s < btol {
                happy = true;
                krylov_dim = j + 1;
                t_step = t_out - t_now;
                break;
            }
            h[(j + 1, j)] = C64::new(s, 0.0);
            for (b, x) in basis[j + 1].iter_mut().zip(&p) {
                *b = x / s;
            }
        }
        let mut avnorm = 0.0;
        if !happy {
            h[(m + 1, m)] = C64::new(1.0, 0.0);
            avnorm = vec_norm(&a.apply(&basis[m]));
        }

        let mut rejections = 0;
        let (f, err_loc, xm) = loop {
            let mx = if happy { krylov_dim } else { m + 2 };
            let sub = DenseMatrix::from_fn(mx, mx, |i, j| h[(i, j)] * (sgn * t_step));
            let f = expm(&sub)?;
            if happy {
                break (f, btol, 1.0 / m as f64);
            }
            let phi1 = (f[(m, 0)] * beta).norm();
            let phi2 = (f[(m + 1, 0)] * beta * avnorm).norm();
            let (err, xm) = if phi1 > 10.0 * phi2 {
                (phi2, 1.0 / m as f64)
            } else if phi1 > phi2 {
                ((phi1 * phi2) / (phi1 - phi2), 1.0 / m as f64)
            } else {
                (phi1, 1.0 / (m as f64 - 1.0).max(1.0))
            };
            if err <= delta * t_step * tol {
                break (f, err, xm);
            }
            rejections += 1;
            if rejections > opts.max_rejections {
                return Err(LinalgError::NoConvergence {
                    algorithm: "Krylov expm_action",
                    iterations: rejections,
                });
            }
            t_step = round_step(gamma * t_step * (t_step * tol / err).powf(xm));
        };

        let mx = if happy { krylov_dim } else { m + 1 };
        w.iter_mut().for_each(|x| *x = ZERO);
        for (j, b) in basis.iter().enumerate().take(mx) {
            let c = f[(j, 0)] * beta;
            for (wk, bk) in w.iter_mut().zip(b) {
                *wk += c * bk;
            }
        }
        beta = vec_norm(&w);
        if beta == 0.0 {
            break;
        }
        t_now += t_step;
        let err_loc = err_loc.max(f64::EPSILON * anorm);
        t_new = round_step(gamma * t_step * (t_step * tol / err_loc).powf(xm));
    }
    Ok(w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_with_norm(n: usize, seed: u64, norm: f64) -> DenseMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = DenseMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
        let s = norm / a.norm_one();
        a.scale_real(s)
    }

    #[test]
    fn zero_and_diagonal() {
        assert_eq!(expm(&DenseMatrix::zeros(3, 3)).unwrap(), DenseMatrix::identity(3));
        let e = expm(&DenseMatrix::real_diag(&[0.3, -2.0])).unwrap();
        assert!((e[(0, 0)].re - 0.3f64.exp()).abs() < 1e-15);
        assert!((e[(1, 1)].re - (-2f64).exp()).abs() < 1e-15);
        assert!(e[(0, 1)].norm() == 0.0 && e[(1, 0)].norm() == 0.0);
    }

    #[test]
    fn rotation_matches_closed_form() {
        // exp(-i θ/2 σ_y) = cos(θ/2) I - i sin(θ/2) σ_y
        for theta in [0.1, 1.0, 2.5, 7.0, 31.0] {
            let gen = DenseMatrix::from_rows(&[
                [ZERO, C64::new(-theta / 2.0, 0.0)],
                [C64::new(theta / 2.0, 0.0), ZERO],
            ])
            .unwrap();
            // -i (θ/2) σ_y = (θ/2) [[0, -1], [1, 0]]
            let e = expm(&gen).unwrap();
            let (c, s) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            let expected = DenseMatrix::from_real_rows(&[[c, -s], [s, c]]).unwrap();
            assert!((&e - &expected).norm_max() < 1e-13, "theta={theta}");
        }
    }

    #[test]
    fn inverse_pair_gives_identity() {
        for (n, seed) in [(4, 1), (10, 2), (16, 3)] {
            for norm in [0.01, 0.5, 2.0, 10.0] {
                let a = random_with_norm(n, seed, norm);
                let p = &expm(&a).unwrap() * &expm(&-&a).unwrap();
                let err = (&p - &DenseMatrix::identity(n)).norm_max();
                assert!(err <= 1e-10, "n={n} norm={norm} err={err}");
            }
        }
    }

    #[test]
    fn commuting_sum_factorizes() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let n = 6;
        let q = crate::linalg::eigh(&{
            let r = DenseMatrix::from_fn(n, n, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
            (&r + &r.adjoint()).scale_real(0.5)
        })
        .unwrap()
        .vectors;
        let d1: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-2.0..1.0), rng.gen_range(-3.0..3.0))).collect();
        let d2: Vec<C64> = (0..n).map(|_| C64::new(rng.gen_range(-2.0..1.0), rng.gen_range(-3.0..3.0))).collect();
        let a = &(&q * &DenseMatrix::diag(&d1)) * &q.adjoint();
        let b = &(&q * &DenseMatrix::diag(&d2)) * &q.adjoint();
        let lhs = expm(&(&a + &b)).unwrap();
        let rhs = &expm(&a).unwrap() * &expm(&b).unwrap();
        assert!((&lhs - &rhs).norm_max() < 1e-10);
    }

    #[test]
    fn krylov_action_matches_dense() {
        for (n, seed, t) in [(8, 4, 1.0), (40, 5, 3.0), (60, 6, 0.7)] {
            let mut a = random_with_norm(n, seed, 5.0);
            // make it dissipative-ish so long times stay bounded
            for i in 0..n {
                a[(i, i)] -= C64::new(3.0, 0.0);
            }
            let v: Vec<C64> = (0..n).map(|k| C64::new((k as f64).sin(), 0.5)).collect();
            let dense = expm(&a.scale_real(t)).unwrap().mul_vec(&v);
            let kry = expm_action(&a, &v, t, KrylovOptions::default()).unwrap();
            let err = dense.iter().zip(&kry).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max);
            assert!(err < 1e-9, "n={n} err={err}");
        }
    }
}
