//! Spectral analysis of an assembled Liouvillian.
//!
//! The asymptotic decay rate (ADR) and the spectral gap `Δ` are the same
//! number here: once one stationary mode is set aside, the smallest `|Re λ|`
//! left in the spectrum. A degenerate kernel therefore shows up as `Δ = 0`.
//! The slowest decay outside the whole zero cluster is reported separately.
//!
//! Steady states come from the kernel. Any Hermitian element of the kernel of
//! a positive trace-preserving generator has stationary positive and negative
//! parts, so a physical basis is obtained by splitting the Hermitized kernel
//! vectors into those parts and keeping a linearly independent subset.

use rayon::prelude::*;
use thiserror::Error;

use crate::linalg::{eig_general, eigh, null_space, DenseMatrix, LinalgError, C64};
use crate::liouvillian::{assemble_liouvillian, LiouvillianBundle, LiouvillianError};
use crate::model::{Coupling, ModelSpec};

/// Eigenvalues of a kernel state below this are clipped to zero.
pub const POSITIVITY_CLIP: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectraError {
    #[error("no zero mode within tolerance {tol:e}; trace preservation is broken upstream")]
    NoZeroMode { tol: f64 },
    #[error("steady state {index} has eigenvalue {min_eig:e} below the clipping window")]
    NotPositive { index: usize, min_eig: f64 },
    #[error("kernel dimension {kernel} but only {physical} independent physical states recovered")]
    IncompleteBasis { kernel: usize, physical: usize },
    #[error(transparent)]
    Linalg(#[from] LinalgError),
    #[error(transparent)]
    Liouvillian(#[from] LiouvillianError),
}

pub type Result<T> = std::result::Result<T, SpectraError>;

/// Zero-cluster threshold `tol_abs + tol_rel·‖L‖₁`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroTolerance {
    pub abs: f64,
    pub rel: f64,
}

impl Default for ZeroTolerance {
    fn default() -> Self {
        Self {
            abs: 1e-10,
            rel: 1e-10,
        }
    }
}

impl ZeroTolerance {
    pub fn uniform(tol: f64) -> Self {
        Self { abs: tol, rel: tol }
    }

    pub fn threshold(&self, norm: f64) -> f64 {
        self.abs + self.rel * norm
    }
}

#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    pub zero_mode_count: usize,
    /// ADR: smallest `|Re λ|` after removing one stationary mode.
    pub adr: f64,
    /// Same as `adr`.
    pub gap: f64,
    /// Smallest `|Re λ|` among eigenvalues outside the zero cluster.
    pub slowest_nonzero_decay: Option<f64>,
    /// All `|λ|`, ascending, for auditing cluster separation.
    pub sorted_moduli: Vec<f64>,
    pub steady_states: Vec<DenseMatrix>,
    /// Orthonormal kernel basis as returned by the null-space solver.
    pub raw_kernel: Vec<Vec<C64>>,
    pub superop_norm: f64,
    pub tol_used: ZeroTolerance,
}

impl SpectrumReport {
    pub fn is_zero_mode(&self, lambda: C64) -> bool {
        lambda.norm() <= self.tol_used.threshold(self.superop_norm)
    }
}

/// Decay-rate figures from a bare eigenvalue list.
pub fn decay_rates(eigenvalues: &[C64], zero_threshold: f64) -> (usize, f64, Option<f64>) {
    let zero_count = eigenvalues.iter().filter(|z| z.norm() <= zero_threshold).count();
    let mut by_modulus: Vec<&C64> = eigenvalues.iter().collect();
    by_modulus.sort_by(|a, b| a.norm().total_cmp(&b.norm()));
    let adr = by_modulus
        .iter()
        .skip(1)
        .map(|z| z.re.abs())
        .fold(f64::INFINITY, f64::min);
    let slowest = eigenvalues
        .iter()
        .filter(|z| z.norm() > zero_threshold)
        .map(|z| z.re.abs())
        .reduce(f64::min);
    (zero_count, if adr.is_finite() { adr } else { 0.0 }, slowest)
}

pub fn analyze(bundle: &LiouvillianBundle, tol: ZeroTolerance) -> Result<SpectrumReport> {
    let l = &bundle.dense_superop();
    let norm = l.norm_one();
    let threshold = tol.threshold(norm);
    let eigenvalues = eig_general(l, false)?.values;
    let (zero_mode_count, adr, slowest_nonzero_decay) = decay_rates(&eigenvalues, threshold);
    if zero_mode_count == 0 {
        return Err(SpectraError::NoZeroMode { tol: threshold });
    }
    let mut sorted_moduli: Vec<f64> = eigenvalues.iter().map(|z| z.norm()).collect();
    sorted_moduli.sort_by(f64::total_cmp);

    let raw_kernel = null_space(l, threshold / norm.max(f64::MIN_POSITIVE))?;
    if raw_kernel.is_empty() {
        return Err(SpectraError::NoZeroMode { tol: threshold });
    }
    let steady_states = physical_states(&raw_kernel, bundle.dim())?;
    Ok(SpectrumReport {
        eigenvalues,
        zero_mode_count,
        adr,
        gap: adr,
        slowest_nonzero_decay,
        sorted_moduli,
        steady_states,
        raw_kernel,
        superop_norm: norm,
        tol_used: tol,
    })
}

/// Hermitizes, clips and unit-trace-normalizes a candidate state.
fn finish_state(m: &DenseMatrix, index: usize) -> Result<Option<DenseMatrix>> {
    let h = m.hermitian_part();
    let tr = h.trace().re;
    if tr.abs() < 1e-12 {
        return Ok(None);
    }
    let rho = h.scale_real(1.0 / tr);
    let e = eigh(&rho)?;
    let min = e.values[0];
    if min < -POSITIVITY_CLIP {
        return Err(SpectraError::NotPositive { index, min_eig: min });
    }
    if min >= 0.0 {
        return Ok(Some(rho));
    }
    let clipped: Vec<f64> = e.values.iter().map(|&p| p.max(0.0)).collect();
    let rebuilt = &(&e.vectors * &DenseMatrix::real_diag(&clipped)) * &e.vectors.adjoint();
    let tr = rebuilt.trace().re;
    Ok(Some(rebuilt.scale_real(1.0 / tr)))
}

/// Positive and negative parts of a Hermitian matrix, as separate matrices.
fn jordan_parts(h: &DenseMatrix, cut: f64) -> Result<[DenseMatrix; 2]> {
    let e = eigh(h)?;
    let part = |sign: f64| {
        let w: Vec<f64> = e.values.iter().map(|&p| if sign * p > cut { sign * p } else { 0.0 }).collect();
        &(&e.vectors * &DenseMatrix::real_diag(&w)) * &e.vectors.adjoint()
    };
    Ok([part(1.0), part(-1.0)])
}

fn physical_states(kernel: &[Vec<C64>], d: usize) -> Result<Vec<DenseMatrix>> {
    let mats: Vec<DenseMatrix> = kernel
        .iter()
        .map(|v| DenseMatrix::unvectorize(v, d))
        .collect::<std::result::Result<_, _>>()?;
    if mats.len() == 1 {
        let state = finish_state(&mats[0], 0)?;
        return state.map(|s| vec![s]).ok_or(SpectraError::IncompleteBasis { kernel: 1, physical: 0 });
    }
    // Hermitian generators of the kernel's real span
    let mut hermitian = Vec::with_capacity(2 * mats.len());
    for m in &mats {
        hermitian.push(m.hermitian_part());
        let adj = m.adjoint();
        hermitian.push((m - &adj).scale(C64::new(0.0, -0.5)));
    }
    let mut candidates = Vec::new();
    for h in &hermitian {
        let scale = h.norm_max();
        if scale < 1e-12 {
            continue;
        }
        for part in jordan_parts(h, 1e-10 * scale)? {
            let tr = part.trace().re;
            if tr > 1e-10 * scale {
                candidates.push(part.scale_real(1.0 / tr));
            }
        }
    }
    // greedy independent subset, in Hilbert–Schmidt geometry
    let mut chosen: Vec<DenseMatrix> = Vec::new();
    let mut ortho: Vec<Vec<C64>> = Vec::new();
    for c in candidates {
        let mut v = c.vectorize();
        for b in &ortho {
            let p: C64 = b.iter().zip(&v).map(|(x, y)| x.conj() * y).sum();
            v.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        let norm = v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
        if norm > 1e-6 * c.norm_fro() {
            v.iter_mut().for_each(|x| *x /= norm);
            ortho.push(v);
            chosen.push(c);
        }
        if chosen.len() == mats.len() {
            break;
        }
    }
    if chosen.len() < mats.len() {
        return Err(SpectraError::IncompleteBasis {
            kernel: mats.len(),
            physical: chosen.len(),
        });
    }
    chosen
        .iter()
        .enumerate()
        .map(|(i, c)| finish_state(c, i)?.ok_or(SpectraError::IncompleteBasis { kernel: mats.len(), physical: i }))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdrRow {
    pub alpha: f64,
    pub adr: f64,
    pub zero_mode_count: usize,
}

fn with_alpha(spec: &ModelSpec, alpha: f64) -> ModelSpec {
    let mut s = spec.clone();
    s.coupling = Coupling::AlphaOverride(alpha);
    s
}

/// ADR across a grid of uniform pair correlations. Rows follow grid order.
pub fn adr_vs_alpha(spec: &ModelSpec, alphas: &[f64], tol: ZeroTolerance) -> Result<Vec<AdrRow>> {
    alphas
        .par_iter()
        .map(|&alpha| {
            let bundle = assemble_liouvillian(&with_alpha(spec, alpha))?;
            let norm = bundle.superop.norm_one();
            let ev = eig_general(&bundle.dense_superop(), false)?.values;
            let (zero_mode_count, adr, _) = decay_rates(&ev, tol.threshold(norm));
            Ok(AdrRow {
                alpha,
                adr,
                zero_mode_count,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::liouvillian::assemble_from_rates;
    use crate::model::{AlphaMatrix, RateSet};

    fn bundle(n: usize, m0: f64, alpha: f64) -> LiouvillianBundle {
        assemble_from_rates(RateSet::from_magnetization(1.0, m0, AlphaMatrix::uniform(n, alpha)), 0.0, 0.0).unwrap()
    }

    #[test]
    fn single_spin_fixed_point() {
        let m0 = 0.35;
        let r = analyze(&bundle(1, m0, 1.0), ZeroTolerance::default()).unwrap();
        assert_eq!(r.zero_mode_count, 1);
        let expected = DenseMatrix::real_diag(&[(1.0 + m0) / 2.0, (1.0 - m0) / 2.0]);
        assert!((&r.steady_states[0] - &expected).norm_max() < 1e-12);
        assert!((r.adr - 1.0).abs() < 1e-12);
    }

    #[test]
    fn partial_correlation_has_unique_thermal_state() {
        let m0 = 0.5;
        let r = analyze(&bundle(2, m0, 0.5), ZeroTolerance::default()).unwrap();
        assert_eq!(r.zero_mode_count, 1);
        assert!(r.adr > 0.01);
        let one = DenseMatrix::real_diag(&[(1.0 + m0) / 2.0, (1.0 - m0) / 2.0]);
        let gibbs = crate::linalg::kron(&one, &one).unwrap();
        assert!((&r.steady_states[0] - &gibbs).norm_max() < 1e-8);
    }

    #[test]
    fn full_correlation_has_degenerate_kernel() {
        let r = analyze(&bundle(2, 0.6, 1.0), ZeroTolerance::default()).unwrap();
        assert!(r.zero_mode_count >= 2);
        assert_eq!(r.steady_states.len(), r.raw_kernel.len());
        assert!(r.adr < 1e-8);
        assert!(r.slowest_nonzero_decay.unwrap() > 0.1);
        for s in &r.steady_states {
            assert!((s.trace().re - 1.0).abs() < 1e-10);
            assert!(s.hermitian_defect() < 1e-10);
            assert!(eigh(s).unwrap().values[0] >= -1e-8);
        }
        // the singlet projector lies in the span of the returned states
        let sq = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [C64::new(0.0, 0.0), C64::new(sq, 0.0), C64::new(-sq, 0.0), C64::new(0.0, 0.0)];
        let singlet = DenseMatrix::outer(&psi, &psi).vectorize();
        let basis = crate::linalg::orthonormalize(r.steady_states.iter().map(|s| s.vectorize()).collect(), 1e-12);
        let mut resid = singlet.clone();
        for b in &basis {
            let p: C64 = b.iter().zip(&singlet).map(|(x, y)| x.conj() * y).sum();
            resid.iter_mut().zip(b).for_each(|(x, y)| *x -= p * y);
        }
        assert!(resid.iter().map(|z| z.norm()).fold(0.0, f64::max) < 1e-9);
    }

    #[test]
    fn adr_grid_rows_follow_input() {
        let spec = ModelSpec::with_alpha(2, 1.0, 0.4, 0.5);
        let rows = adr_vs_alpha(&spec, &[0.0, 0.5, 1.0], ZeroTolerance::default()).unwrap();
        assert_eq!(rows.len(), 3);
        assert_eq!(rows.iter().map(|r| r.alpha).collect::<Vec<_>>(), vec![0.0, 0.5, 1.0]);
        // independent spins: Kronecker-sum spectrum, slowest decay = single-spin coherence rate R1
        assert!((rows[0].adr - 1.0).abs() < 1e-10);
        assert!(rows[2].adr < 1e-8);
    }
}
