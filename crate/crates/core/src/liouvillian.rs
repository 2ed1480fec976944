//! Site operators, the bath-induced Lamb shift, the correlated dissipator and
//! the vectorized Liouvillian.
//!
//! Conventions: `σ_z = diag(1, -1)`, `|0⟩` is the excited (`σ_z = +1`) state
//! and `σ₊ = |0⟩⟨1|`. Site `m` of `n` is embedded as `I ⊗ … ⊗ σ ⊗ … ⊗ I` with
//! site 0 the most significant tensor factor. Superoperators act on the
//! column-stacked `vec(ρ)`, so `XρY ↦ (Yᵀ ⊗ X)`.
//!
//! The dissipator is
//!
//! ```text
//! D ρ = Σ_ij A_ij (2 σ₋ⁱ ρ σ₊ʲ − {σ₊ʲ σ₋ⁱ, ρ}) + B_ij (2 σ₊ⁱ ρ σ₋ʲ − {σ₋ʲ σ₊ⁱ, ρ})
//! ```
//!
//! with `A_ij = α_ij A(0)`, `B_ij = α_ij B(0)`. The lowering channel carries
//! `A(0)` and the raising channel `B(0)`, which is the assignment under which
//! the two-spin observables `(M_z, M_zz, M_c)` obey the closed Bloch system
//! of [`crate::dynamics`] exactly, relaxing to `M_z = +M₀`.

use thiserror::Error;

use crate::linalg::{DenseMatrix, LinalgError, SparseMatrix, C64, I, ONE, ZERO};
use crate::model::{rates_from_spec, ModelError, ModelSpec, RateSet, MAX_SPINS};

/// Overall factor applied to the dissipator. Calibrated against the reduced
/// Bloch equations; no rescaling is needed.
pub const DISSIPATOR_NORMALIZATION: f64 = 1.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LiouvillianError {
    #[error("{n} spins exceed the supported maximum of {max}")]
    Capacity { n: usize, max: usize },
    #[error("need at least one spin")]
    NoSpins,
    #[error("invalid model: {0:?}")]
    Model(Vec<ModelError>),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, LiouvillianError>;

pub fn sigma_plus() -> DenseMatrix {
    DenseMatrix::from_real_rows(&[[0.0, 1.0], [0.0, 0.0]]).unwrap()
}

pub fn sigma_minus() -> DenseMatrix {
    DenseMatrix::from_real_rows(&[[0.0, 0.0], [1.0, 0.0]]).unwrap()
}

pub fn sigma_x() -> DenseMatrix {
    DenseMatrix::from_real_rows(&[[0.0, 1.0], [1.0, 0.0]]).unwrap()
}

pub fn sigma_y() -> DenseMatrix {
    DenseMatrix::from_rows(&[[ZERO, -I], [I, ZERO]]).unwrap()
}

pub fn sigma_z() -> DenseMatrix {
    DenseMatrix::real_diag(&[1.0, -1.0])
}

/// Embeds a single-site operator at `site` of `n` spins.
pub fn embed(op: &DenseMatrix, site: usize, n: usize) -> DenseMatrix {
    let left = DenseMatrix::identity(1 << site);
    let right = DenseMatrix::identity(1 << (n - site - 1));
    let m = crate::linalg::kron(&left, op).expect("site embedding within capacity");
    crate::linalg::kron(&m, &right).expect("site embedding within capacity")
}

#[derive(Debug, Clone)]
pub struct SiteOperators {
    n: usize,
    pub raise: Vec<DenseMatrix>,
    pub lower: Vec<DenseMatrix>,
    pub sz: Vec<DenseMatrix>,
}

impl SiteOperators {
    pub fn n(&self) -> usize {
        self.n
    }

    /// Hilbert-space dimension `2^n`.
    pub fn dim(&self) -> usize {
        1 << self.n
    }
}

pub fn build_site_operators(n: usize) -> Result<SiteOperators> {
    if n == 0 {
        return Err(LiouvillianError::NoSpins);
    }
    if n > MAX_SPINS {
        return Err(LiouvillianError::Capacity { n, max: MAX_SPINS });
    }
    let (sp, sm, sz) = (sigma_plus(), sigma_minus(), sigma_z());
    Ok(SiteOperators {
        n,
        raise: (0..n).map(|m| embed(&sp, m, n)).collect(),
        lower: (0..n).map(|m| embed(&sm, m, n)).collect(),
        sz: (0..n).map(|m| embed(&sz, m, n)).collect(),
    })
}

#[derive(Debug, Clone)]
pub struct LambShift {
    /// Hermitized Hamiltonian `(H + H†)/2`.
    pub hamiltonian: DenseMatrix,
    /// `max |H − H†| / 2` of the operator before Hermitization.
    pub anti_hermitian_residual: f64,
}

/// `H = Σ_ij α_ij (j0 σ₊ⁱσ₋ʲ − k0 σ₋ⁱσ₊ʲ)`, Hermitized.
pub fn build_lamb_shift(ops: &SiteOperators, rates: &RateSet, j0: f64, k0: f64) -> LambShift {
    let d = ops.dim();
    let mut h = DenseMatrix::zeros(d, d);
    if j0 != 0.0 || k0 != 0.0 {
        for i in 0..ops.n {
            for j in 0..ops.n {
                let a = rates.alpha.get(i, j);
                if j0 != 0.0 {
                    h += &(&ops.raise[i] * &ops.lower[j]).scale_real(a * j0);
                }
                if k0 != 0.0 {
                    h -= &(&ops.lower[i] * &ops.raise[j]).scale_real(a * k0);
                }
            }
        }
    }
    let anti_hermitian_residual = h.hermitian_defect() / 2.0;
    LambShift {
        hamiltonian: h.hermitian_part(),
        anti_hermitian_residual,
    }
}

fn nonzeros(m: &DenseMatrix) -> Vec<(usize, usize, C64)> {
    let mut out = Vec::new();
    for j in 0..m.cols() {
        for (i, &z) in m.column(j).iter().enumerate() {
            if z != ZERO {
                out.push((i, j, z));
            }
        }
    }
    out
}

type Triplets = Vec<(usize, usize, C64)>;

/// Appends the entries of `c · (a ⊗ b)`.
fn accumulate_kron(out: &mut Triplets, a: &[(usize, usize, C64)], b: &[(usize, usize, C64)], b_dim: usize, c: C64) {
    for &(i, j, x) in a {
        let cx = c * x;
        for &(k, l, y) in b {
            out.push((i * b_dim + k, j * b_dim + l, cx * y));
        }
    }
}

fn identity_nonzeros(d: usize) -> Vec<(usize, usize, C64)> {
    (0..d).map(|i| (i, i, ONE)).collect()
}

/// Adds `c·(2 X ρ Y − {Y X, ρ})` to the superoperator.
fn accumulate_channel(out: &mut Triplets, x: &DenseMatrix, y: &DenseMatrix, c: f64, id: &[(usize, usize, C64)]) {
    let d = x.rows();
    let yx = y * x;
    let x_nz = nonzeros(x);
    let yt_nz = nonzeros(&y.transpose());
    let yx_nz = nonzeros(&yx);
    let yxt_nz = nonzeros(&yx.transpose());
    accumulate_kron(out, &yt_nz, &x_nz, d, C64::new(2.0 * c, 0.0));
    accumulate_kron(out, id, &yx_nz, d, C64::new(-c, 0.0));
    accumulate_kron(out, &yxt_nz, id, d, C64::new(-c, 0.0));
}

/// Vectorized dissipator (column stacking).
pub fn build_dissipator_superop(ops: &SiteOperators, rates: &RateSet) -> SparseMatrix {
    let d = ops.dim();
    let mut out = Triplets::new();
    let id = identity_nonzeros(d);
    for i in 0..ops.n {
        for j in 0..ops.n {
            let a = rates.a(i, j) * DISSIPATOR_NORMALIZATION;
            let b = rates.b(i, j) * DISSIPATOR_NORMALIZATION;
            if a != 0.0 {
                accumulate_channel(&mut out, &ops.lower[i], &ops.raise[j], a, &id);
            }
            if b != 0.0 {
                accumulate_channel(&mut out, &ops.raise[i], &ops.lower[j], b, &id);
            }
        }
    }
    SparseMatrix::from_triplets(d * d, out).expect("indices within d²")
}

fn hamiltonian_triplets(h: &DenseMatrix) -> Triplets {
    let d = h.rows();
    let mut out = Triplets::new();
    let id = identity_nonzeros(d);
    accumulate_kron(&mut out, &id, &nonzeros(h), d, -I);
    accumulate_kron(&mut out, &nonzeros(&h.transpose()), &id, d, I);
    out
}

/// `−i(I ⊗ H − Hᵀ ⊗ I)`.
pub fn hamiltonian_superop(h: &DenseMatrix) -> SparseMatrix {
    SparseMatrix::from_triplets(h.rows() * h.rows(), hamiltonian_triplets(h)).expect("indices within d²")
}

#[derive(Debug, Clone)]
pub struct LiouvillianBundle {
    /// Vectorized generator, stored sparse; see [`dense_superop`](Self::dense_superop).
    pub superop: SparseMatrix,
    pub lamb: LambShift,
    pub rates: RateSet,
    pub ops: SiteOperators,
    pub spec: Option<ModelSpec>,
}

impl LiouvillianBundle {
    pub fn n_spins(&self) -> usize {
        self.ops.n
    }

    /// Hilbert-space dimension.
    pub fn dim(&self) -> usize {
        self.ops.dim()
    }

    pub fn a_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.ops.n;
        (0..n).map(|i| (0..n).map(|j| self.rates.a(i, j)).collect()).collect()
    }

    pub fn b_matrix(&self) -> Vec<Vec<f64>> {
        let n = self.ops.n;
        (0..n).map(|i| (0..n).map(|j| self.rates.b(i, j)).collect()).collect()
    }

    /// Dense copy of the superoperator, for spectral work on small systems.
    pub fn dense_superop(&self) -> DenseMatrix {
        self.superop.to_dense()
    }

    /// `L(ρ)` as a matrix.
    pub fn apply(&self, rho: &DenseMatrix) -> DenseMatrix {
        let v = self.superop.mul_vec(rho.as_slice());
        DenseMatrix::unvectorize(&v, self.dim()).expect("superop maps d² to d²")
    }

    /// `max_k |Σ_i L[(i,i)-row, k]|`: how far `vec(I)† L` is from zero.
    pub fn trace_flow_defect(&self) -> f64 {
        let d = self.dim();
        let mut flow = vec![ZERO; d * d];
        for (r, c, z) in self.superop.entries() {
            if r % (d + 1) == 0 {
                flow[c] += z;
            }
        }
        flow.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }
}

pub fn assemble_from_rates(rates: RateSet, j0: f64, k0: f64) -> Result<LiouvillianBundle> {
    let ops = build_site_operators(rates.alpha.n())?;
    let lamb = build_lamb_shift(&ops, &rates, j0, k0);
    let superop = if lamb.hamiltonian.norm_max() > 0.0 {
        let mut t: Triplets = build_dissipator_superop(&ops, &rates).entries().collect();
        t.extend(hamiltonian_triplets(&lamb.hamiltonian));
        SparseMatrix::from_triplets(ops.dim() * ops.dim(), t)?
    } else {
        build_dissipator_superop(&ops, &rates)
    };
    Ok(LiouvillianBundle {
        superop,
        lamb,
        rates,
        ops,
        spec: None,
    })
}

pub fn assemble_liouvillian(spec: &ModelSpec) -> Result<LiouvillianBundle> {
    if spec.n_spins > MAX_SPINS {
        return Err(LiouvillianError::Capacity {
            n: spec.n_spins,
            max: MAX_SPINS,
        });
    }
    spec.validate().map_err(LiouvillianError::Model)?;
    let mut bundle = assemble_from_rates(rates_from_spec(spec), spec.lamb_j0, spec.lamb_k0)?;
    bundle.spec = Some(spec.clone());
    Ok(bundle)
}

#[derive(Debug, Clone)]
pub struct SymmetryReport {
    pub superop_norm: f64,
    /// `‖[L, P_ij]‖₁` for every site pair, `P_ij` conjugation by the swap.
    pub swap: Vec<((usize, usize), f64)>,
    /// `‖[L, G_S]‖₁` with `G_S = −i[S, ·]`, `S = σx⊗σx + σy⊗σy + σz⊗σz`
    /// (two spins only).
    pub s_generator: Option<f64>,
}

impl SymmetryReport {
    pub fn max_swap(&self) -> f64 {
        self.swap.iter().map(|(_, v)| *v).fold(0.0, f64::max)
    }
}

/// Index permutation of `0..2^n` exchanging the bits of sites `a` and `b`.
fn swap_permutation(n: usize, a: usize, b: usize) -> Vec<usize> {
    let (ba, bb) = (n - 1 - a, n - 1 - b);
    (0..1usize << n)
        .map(|k| {
            let (x, y) = ((k >> ba) & 1, (k >> bb) & 1);
            (k & !(1 << ba) & !(1 << bb)) | (y << ba) | (x << bb)
        })
        .collect()
}

/// The exchange operator `S` of two spins.
pub fn heisenberg_exchange() -> DenseMatrix {
    let k = |a: &DenseMatrix| crate::linalg::kron(a, a).unwrap();
    &(&k(&sigma_x()) + &k(&sigma_y())) + &k(&sigma_z())
}

pub fn check_weak_symmetry(bundle: &LiouvillianBundle) -> SymmetryReport {
    let n = bundle.n_spins();
    let d = bundle.dim();
    let l = &bundle.superop;
    let mut swap = Vec::new();
    for a in 0..n {
        for b in a + 1..n {
            // conjugation by a permutation P acts on vec(ρ) as P ⊗ P
            let p = swap_permutation(n, a, b);
            let big: Vec<usize> = (0..d * d).map(|k| p[k % d] + d * p[k / d]).collect();
            let mut diff: Triplets = l.entries().collect();
            diff.extend(l.entries().map(|(r, c, z)| (big[r], big[c], -z)));
            let worst = SparseMatrix::from_triplets(d * d, diff).map_or(f64::INFINITY, |m| m.norm_one());
            swap.push(((a, b), worst));
        }
    }
    let s_generator = (n == 2).then(|| {
        let g = hamiltonian_superop(&heisenberg_exchange()).to_dense();
        bundle.dense_superop().commutator(&g).norm_one()
    });
    SymmetryReport {
        superop_norm: l.norm_one(),
        swap,
        s_generator,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{eig_general, kron};
    use crate::model::AlphaMatrix;

    fn rates(n: usize, m0: f64, alpha: f64) -> RateSet {
        RateSet::from_magnetization(1.0, m0, AlphaMatrix::uniform(n, alpha))
    }

    fn singlet() -> DenseMatrix {
        let s = std::f64::consts::FRAC_1_SQRT_2;
        let psi = [ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO];
        DenseMatrix::outer(&psi, &psi)
    }

    #[test]
    fn site_operator_conventions() {
        let one = build_site_operators(1).unwrap();
        assert_eq!(one.raise[0], sigma_plus());
        let two = build_site_operators(2).unwrap();
        // |01⟩ is index 1; raising site 1 gives |00⟩
        let ket01 = [ZERO, ONE, ZERO, ZERO];
        let out = two.raise[1].mul_vec(&ket01);
        assert_eq!(out[0], ONE);
        assert!(out[1..].iter().all(|z| *z == ZERO));
        for m in 0..2 {
            assert_eq!((&two.raise[m] * &two.raise[m]).norm_max(), 0.0);
            assert_eq!(two.raise[m], two.lower[m].adjoint());
        }
        assert_eq!(two.raise[0].commutator(&two.lower[1]).norm_max(), 0.0);
        assert!(matches!(build_site_operators(8), Err(LiouvillianError::Capacity { n: 8, .. })));
    }

    #[test]
    fn lamb_shift_cases() {
        let ops = build_site_operators(2).unwrap();
        let zero = build_lamb_shift(&ops, &rates(2, 0.3, 0.5), 0.0, 0.0);
        assert_eq!(zero.hamiltonian.norm_max(), 0.0);

        let h = build_lamb_shift(&ops, &rates(2, 0.3, 1.0), 1.0, 0.0).hamiltonian;
        let exchange = &kron(&sigma_plus(), &sigma_minus()).unwrap() + &kron(&sigma_minus(), &sigma_plus()).unwrap();
        // by hand: Σ_i σ₊ⁱσ₋ⁱ + exchange = (I+σz)/2 ⊗ I + I ⊗ (I+σz)/2 + exchange
        let on_site = DenseMatrix::real_diag(&[2.0, 1.0, 1.0, 0.0]);
        assert!((&h - &(&on_site + &exchange)).norm_max() < 1e-15);

        let one = build_site_operators(1).unwrap();
        let h1 = build_lamb_shift(&one, &rates(1, 0.3, 1.0), 0.7, 0.2).hamiltonian;
        // 0.7 (I+σz)/2 − 0.2 (I−σz)/2
        assert!((&h1 - &DenseMatrix::real_diag(&[0.7, -0.2])).norm_max() < 1e-15);
    }

    #[test]
    fn single_spin_relaxes_toward_m0() {
        let m0 = 0.4;
        let b = assemble_from_rates(rates(1, m0, 1.0), 0.0, 0.0).unwrap();
        let mixed = DenseMatrix::identity(2).scale_real(0.5);
        let drho = b.apply(&mixed);
        // d⟨σz⟩/dt = −2R1(⟨σz⟩ − m0) = 2 R1 m0 at ⟨σz⟩ = 0
        let dz = (&sigma_z() * &drho).trace().re;
        assert!((dz - 2.0 * m0).abs() < 1e-15);
    }

    #[test]
    fn uncorrelated_pair_is_kronecker_sum() {
        let single = assemble_from_rates(rates(1, 0.3, 1.0), 0.0, 0.0).unwrap().dense_superop();
        let pair = assemble_from_rates(rates(2, 0.3, 0.0), 0.0, 0.0).unwrap().dense_superop();
        // vec of ρ₁⊗ρ₂ is not vec ρ₁ ⊗ vec ρ₂ under column stacking; compare actions instead
        let r1 = DenseMatrix::from_real_rows(&[[0.6, 0.1], [0.1, 0.4]]).unwrap();
        let r2 = DenseMatrix::from_rows(&[[C64::new(0.3, 0.0), C64::new(0.0, 0.2)], [C64::new(0.0, -0.2), C64::new(0.7, 0.0)]]).unwrap();
        let act = |l: &DenseMatrix, r: &DenseMatrix| DenseMatrix::unvectorize(&l.mul_vec(r.as_slice()), r.rows()).unwrap();
        let lhs = act(&pair, &kron(&r1, &r2).unwrap());
        let rhs = &kron(&act(&single, &r1), &r2).unwrap() + &kron(&r1, &act(&single, &r2)).unwrap();
        assert!((&lhs - &rhs).norm_max() < 1e-12);
    }

    #[test]
    fn singlet_is_dark_at_full_correlation() {
        let b = assemble_from_rates(rates(2, 0.6, 1.0), 0.0, 0.0).unwrap();
        let r = b.apply(&singlet());
        assert!(r.norm_max() <= 1e-12 * b.superop.norm_one());
        let b = assemble_from_rates(rates(2, 0.6, 0.5), 0.0, 0.0).unwrap();
        assert!(b.apply(&singlet()).norm_max() > 1e-3);
    }

    #[test]
    fn trace_preservation() {
        for alpha in [0.0, 0.4, 1.0] {
            let b = assemble_from_rates(rates(3, 0.2, alpha), 0.3, 0.1).unwrap();
            assert!(b.trace_flow_defect() < 1e-12);
        }
    }

    #[test]
    fn single_spin_spectrum() {
        let b = assemble_from_rates(rates(1, 0.5, 1.0), 0.0, 0.0).unwrap();
        let mut ev: Vec<f64> = eig_general(&b.dense_superop(), false).unwrap().values.iter().map(|z| z.re).collect();
        ev.sort_by(f64::total_cmp);
        // populations relax at 2R1, coherences at R1
        let expected = [-2.0, -1.0, -1.0, 0.0];
        for (x, y) in ev.iter().zip(expected) {
            assert!((x - y).abs() < 1e-12, "{ev:?}");
        }
    }

    #[test]
    fn weak_symmetry_report() {
        let crit = check_weak_symmetry(&assemble_from_rates(rates(2, 0.5, 1.0), 0.0, 0.0).unwrap());
        assert!(crit.s_generator.unwrap() <= 1e-10 * crit.superop_norm);
        assert!(crit.max_swap() <= 1e-10 * crit.superop_norm);
        let off = check_weak_symmetry(&assemble_from_rates(rates(2, 0.5, 0.3), 0.0, 0.0).unwrap());
        assert!(off.s_generator.unwrap() > 1e-6 * off.superop_norm);
        assert!(off.max_swap() <= 1e-10 * off.superop_norm);
    }

    #[test]
    fn swap_permutation_exchanges_bits() {
        // n = 3, swap sites 0 and 2: |100⟩ (4) <-> |001⟩ (1)
        let p = swap_permutation(3, 0, 2);
        assert_eq!(p[4], 1);
        assert_eq!(p[1], 4);
        assert_eq!(p[2], 2);
        assert_eq!(p[6], 3);
    }
}
