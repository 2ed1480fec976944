//! Entanglement and entropy of (reduced) density matrices.
//!
//! For the exchange-symmetric, phase-invariant two-qubit states produced by
//! [`density_from_bloch`](crate::dynamics::density_from_bloch) the only
//! nonzero coherence is `ρ₂₃ = M_c` and
//! `√(ρ₁₁ρ₄₄) = ¼√((1 + 4M_zz)² − 4M_z²)`, so the Wootters concurrence is
//! `2·max(0, |M_c| − ¼√(…))` and is positive exactly when
//! `4|M_c| > √((1 + 4M_zz)² − 4M_z²)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{bloch_from_density, BlochState};
use crate::linalg::{eigh, kron, DenseMatrix, LinalgError};
use crate::liouvillian::sigma_y;

/// Eigenvalues treated as zero in the entropy sum.
pub const ENTROPY_CUTOFF: f64 = 1e-12;

/// Eigenvalues of the concurrence product between this and 0 are clipped.
pub const CONCURRENCE_CLIP: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MeasuresError {
    #[error("expected a {expected}x{expected} matrix, got {rows}x{cols}")]
    Shape { expected: usize, rows: usize, cols: usize },
    #[error("concurrence product has eigenvalue {0:e}, below the clipping window")]
    NegativeProduct(f64),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, MeasuresError>;

fn psd_sqrt(rho: &DenseMatrix) -> Result<DenseMatrix> {
    let e = eigh(rho)?;
    let roots: Vec<f64> = e.values.iter().map(|&p| p.max(0.0).sqrt()).collect();
    Ok(&(&e.vectors * &DenseMatrix::real_diag(&roots)) * &e.vectors.adjoint())
}

/// Wootters concurrence of a two-qubit state.
///
/// The `λ_i` are the square roots of the eigenvalues of `ρ ρ̃`, computed from
/// the Hermitian similar matrix `√ρ ρ̃ √ρ`.
pub fn concurrence(rho: &DenseMatrix) -> Result<f64> {
    if rho.dim() != (4, 4) {
        return Err(MeasuresError::Shape {
            expected: 4,
            rows: rho.rows(),
            cols: rho.cols(),
        });
    }
    let yy = kron(&sigma_y(), &sigma_y())?;
    let tilde = &(&yy * &rho.conj()) * &yy;
    let s = psd_sqrt(rho)?;
    let r = &(&s * &tilde) * &s;
    let e = eigh(&r)?;
    if e.values[0] < -CONCURRENCE_CLIP {
        return Err(MeasuresError::NegativeProduct(e.values[0]));
    }
    let mut l: Vec<f64> = e.values.iter().map(|&v| v.max(0.0).sqrt()).collect();
    l.sort_by(|a, b| b.total_cmp(a));
    Ok((l[0] - l[1] - l[2] - l[3]).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PersistentEntanglement {
    /// `4|M_c|`
    pub lhs: f64,
    /// `√((1 + 4M_zz)² − 4M_z²)`, or 0 when the radicand is negative.
    pub rhs: f64,
    pub entangled: bool,
    /// The state lies outside the physical symmetric sector.
    pub radicand_negative: bool,
}

pub fn persistent_entanglement_check(x: BlochState) -> PersistentEntanglement {
    let lhs = 4.0 * x.mc.abs();
    let radicand = (1.0 + 4.0 * x.mzz).powi(2) - 4.0 * x.mz * x.mz;
    let radicand_negative = radicand < 0.0;
    let rhs = if radicand_negative { 0.0 } else { radicand.sqrt() };
    PersistentEntanglement {
        lhs,
        rhs,
        entangled: lhs > rhs,
        radicand_negative,
    }
}

/// `−Tr ρ ln ρ` in nats.
pub fn von_neumann_entropy(rho: &DenseMatrix) -> Result<f64> {
    let e = eigh(rho)?;
    Ok(e
        .values
        .iter()
        .filter(|&&p| p > ENTROPY_CUTOFF)
        .map(|&p| -p * p.ln())
        .sum::<f64>()
        .max(0.0))
}

/// `Tr ρ²`.
pub fn purity(rho: &DenseMatrix) -> f64 {
    // Tr(ρ²) = Σ_ij ρ_ij ρ_ji = Σ |ρ_ij|² for Hermitian ρ
    rho.as_slice().iter().map(|z| z.norm_sqr()).sum()
}

/// Binary entropy `−p ln p − (1−p) ln(1−p)` of a spin with magnetization `m`.
pub fn binary_entropy(m: f64) -> f64 {
    let h = |p: f64| if p > 0.0 { -p * p.ln() } else { 0.0 };
    let p = (1.0 + m) / 2.0;
    h(p) + h(1.0 - p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeasureRecord {
    /// Two-qubit states only.
    pub concurrence: Option<f64>,
    pub persistent: Option<PersistentEntanglement>,
    pub entropy: f64,
    pub purity: f64,
}

pub fn measure(rho: &DenseMatrix) -> Result<MeasureRecord> {
    let two_qubit = rho.dim() == (4, 4);
    let concurrence = if two_qubit { Some(concurrence(rho)?) } else { None };
    let persistent = if two_qubit {
        bloch_from_density(rho).ok().map(persistent_entanglement_check)
    } else {
        None
    };
    Ok(MeasureRecord {
        concurrence,
        persistent,
        entropy: von_neumann_entropy(rho)?,
        purity: purity(rho),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{critical_steady_state, density_from_bloch, random_density, singlet, InitialState};
    use crate::linalg::{expm, C64};
    use crate::liouvillian::{sigma_x, sigma_z};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_local_unitary(rng: &mut ChaCha8Rng) -> DenseMatrix {
        let mut one = || {
            let h = &(&sigma_x().scale_real(rng.gen_range(-2.0..2.0)) + &sigma_y().scale_real(rng.gen_range(-2.0..2.0)))
                + &sigma_z().scale_real(rng.gen_range(-2.0..2.0));
            expm(&h.scale(C64::new(0.0, -1.0))).unwrap()
        };
        let (a, b) = (one(), one());
        kron(&a, &b).unwrap()
    }

    #[test]
    fn concurrence_reference_values() {
        assert!((concurrence(&singlet()).unwrap() - 1.0).abs() < 1e-12);
        let product = InitialState::Product {
            bloch: vec![[0.3, -0.2, 0.5], [0.0, 0.9, 0.1]],
        };
        assert!(concurrence(&product.density(2, 0.0).unwrap()).unwrap() < 1e-7);
        let gibbs = InitialState::Thermal.density(2, 0.7).unwrap();
        assert_eq!(concurrence(&gibbs).unwrap(), 0.0);
        assert!(matches!(
            concurrence(&DenseMatrix::identity(2)),
            Err(MeasuresError::Shape { expected: 4, .. })
        ));
    }

    #[test]
    fn concurrence_is_local_unitary_invariant() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for seed in 0..5 {
            // mix in the singlet so the value is not trivially zero
            let rho = &random_density(4, seed).scale_real(0.3) + &singlet().scale_real(0.7);
            let c = concurrence(&rho).unwrap();
            let u = random_local_unitary(&mut rng);
            let rotated = &(&u * &rho) * &u.adjoint();
            assert!((concurrence(&rotated).unwrap() - c).abs() < 1e-9);
        }
    }

    #[test]
    fn inequality_reference_points() {
        let dark = persistent_entanglement_check(BlochState::dark());
        assert_eq!((dark.lhs, dark.rhs, dark.entangled), (2.0, 0.0, true));
        let m0 = 0.6;
        let th = persistent_entanglement_check(BlochState::thermal(m0));
        assert_eq!(th.lhs, 0.0);
        assert!((th.rhs - (1.0 - m0 * m0)).abs() < 1e-15);
        assert!(!th.entangled);
        let mixed = persistent_entanglement_check(BlochState::new(0.0, 0.0, 0.0));
        assert_eq!((mixed.lhs, mixed.rhs, mixed.entangled), (0.0, 1.0, false));
        let outside = persistent_entanglement_check(BlochState::new(0.9, -0.24, 0.0));
        assert!(outside.radicand_negative);
        assert_eq!(outside.rhs, 0.0);
    }

    #[test]
    fn inequality_agrees_with_concurrence_on_critical_states() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let mut checked = 0;
        for _ in 0..200 {
            let m0: f64 = rng.gen_range(0.0..1.0);
            let f: f64 = rng.gen_range(-0.75..0.25);
            let x = critical_steady_state(m0, f);
            let rho = density_from_bloch(x);
            let c = concurrence(&rho).unwrap();
            let check = persistent_entanglement_check(x);
            // closed form for these X-shaped states
            assert!((c - 2.0 * (x.mc.abs() - check.rhs / 4.0).max(0.0)).abs() < 1e-9);
            if (check.lhs - check.rhs).abs() > 1e-9 {
                assert_eq!(check.entangled, c > 0.0, "{x:?}");
                checked += 1;
            }
        }
        assert!(checked > 150);
    }

    #[test]
    fn entropy_reference_values() {
        assert!(von_neumann_entropy(&singlet()).unwrap().abs() < 1e-12);
        for n in 1..=3 {
            let mixed = InitialState::MaximallyMixed.density(n, 0.0).unwrap();
            assert!((von_neumann_entropy(&mixed).unwrap() - n as f64 * 2f64.ln()).abs() < 1e-12);
            assert!((purity(&mixed) - 1.0 / (1 << n) as f64).abs() < 1e-15);
        }
        let m0 = 0.35;
        let one = InitialState::Thermal.density(1, m0).unwrap();
        let p: f64 = (1.0 + m0) / 2.0;
        let expected = -p * p.ln() - (1.0 - p) * (1.0 - p).ln();
        assert!((von_neumann_entropy(&one).unwrap() - expected).abs() < 1e-14);
        assert!((binary_entropy(m0) - expected).abs() < 1e-15);
        assert_eq!(binary_entropy(1.0), 0.0);
    }

    #[test]
    fn entropy_is_additive_on_products() {
        let (a, b) = (random_density(2, 1), random_density(4, 2));
        let ab = kron(&a, &b).unwrap();
        let sum = von_neumann_entropy(&a).unwrap() + von_neumann_entropy(&b).unwrap();
        assert!((von_neumann_entropy(&ab).unwrap() - sum).abs() < 1e-9);
    }

    #[test]
    fn record_fields() {
        let r = measure(&singlet()).unwrap();
        assert!((r.concurrence.unwrap() - 1.0).abs() < 1e-12);
        assert!(r.persistent.unwrap().entangled);
        assert!((r.purity - 1.0).abs() < 1e-12);
        let r = measure(&random_density(8, 4)).unwrap();
        assert!(r.concurrence.is_none() && r.persistent.is_none());
        assert!(r.entropy > 0.0 && r.entropy <= 3.0 * 2f64.ln());
    }
}
