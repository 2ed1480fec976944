//! Time evolution: the full master equation on `vec(ρ)` and the reduced
//! three-variable Bloch system of two spins.
//!
//! The reduced system tracks
//!
//! ```text
//! M_z  = ½ ⟨σz⊗I + I⊗σz⟩
//! M_zz = ¼ ⟨σz⊗σz⟩
//! M_c  = ¼ ⟨σx⊗σx + σy⊗σy⟩
//! ```
//!
//! and obeys `ẋ = A x + b` with
//!
//! ```text
//!          ⎡ −2      0    4M₀α ⎤         ⎡ 2M₀R1 ⎤
//! A = R1 · ⎢  M₀    −4    2α   ⎥ ,   b = ⎢   0   ⎥ .
//!          ⎣ −M₀α   4α   −2    ⎦         ⎣   0   ⎦
//! ```
//!
//! At `α = 1` the last two rows sum to zero, so `M_zz + M_c` is conserved and
//! the long-time state remembers where it started.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{
    eigh, expm, expm_action, kron, kron_all, partial_trace, solve, DenseMatrix, KrylovOptions, LinalgError, C64,
    ZERO,
};
use crate::liouvillian::{sigma_x, sigma_y, sigma_z, LiouvillianBundle};
use crate::model::RateSet;

/// Largest superoperator side that is exponentiated densely; above it the
/// propagator is applied by Krylov iteration on the sparse generator.
pub const DENSE_PROPAGATOR_LIMIT: usize = 256;

/// `|1 − α|` below this selects the critical branch.
pub const CRITICAL_ALPHA_TOL: f64 = 1e-12;

/// Initial-state checks on trace, Hermiticity and positivity.
pub const PHYSICAL_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("initial state is not physical: {}", .0.join("; "))]
    NotPhysical(Vec<String>),
    #[error("invalid time grid: {0}")]
    TimeGrid(String),
    #[error("initial state preset: {0}")]
    Preset(String),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, DynamicsError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BlochState {
    pub mz: f64,
    pub mzz: f64,
    pub mc: f64,
}

impl BlochState {
    pub const fn new(mz: f64, mzz: f64, mc: f64) -> Self {
        Self { mz, mzz, mc }
    }

    /// The thermal point `(M₀, M₀²/4, 0)`.
    pub fn thermal(m0: f64) -> Self {
        Self::new(m0, m0 * m0 / 4.0, 0.0)
    }

    /// The singlet: `(0, −1/4, −1/2)`.
    pub const fn dark() -> Self {
        Self::new(0.0, -0.25, -0.5)
    }

    /// `M_zz + M_c`, conserved at full correlation.
    pub fn conserved(&self) -> f64 {
        self.mzz + self.mc
    }

    pub fn to_array(self) -> [f64; 3] {
        [self.mz, self.mzz, self.mc]
    }

    pub fn from_array(x: [f64; 3]) -> Self {
        Self::new(x[0], x[1], x[2])
    }

    /// Operator-norm bounds `|M_z| ≤ 1`, `|M_zz| ≤ 1/4`, `|M_c| ≤ 1/2`.
    pub fn within_bounds(&self, slack: f64) -> bool {
        self.mz.abs() <= 1.0 + slack && self.mzz.abs() <= 0.25 + slack && self.mc.abs() <= 0.5 + slack
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        (self.mz - other.mz)
            .abs()
            .max((self.mzz - other.mzz).abs())
            .max((self.mc - other.mc).abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    DensePropagator,
    Krylov,
    BlochExpm,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StepDiagnostics {
    /// Propagator applications.
    pub steps: usize,
    /// Distinct dense propagators computed.
    pub propagators: usize,
    pub max_trace_defect: f64,
    pub max_hermitian_defect: f64,
    /// Smallest eigenvalue seen along the trajectory (full path only).
    pub min_eigenvalue: f64,
}

#[derive(Debug, Clone)]
pub struct Trajectory<S> {
    pub times: Vec<f64>,
    pub states: Vec<S>,
    pub method: Method,
    pub diagnostics: StepDiagnostics,
}

#[derive(Debug, Clone, Copy)]
pub struct EvolveOptions {
    /// Largest dense propagation step; `None` means `0.01/R1`.
    pub max_step: Option<f64>,
    pub dense_limit: usize,
    pub krylov: KrylovOptions,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            max_step: None,
            dense_limit: DENSE_PROPAGATOR_LIMIT,
            // the local error accumulates over long horizons; trace must stay within 1e-9 at t = 50/R1
            krylov: KrylovOptions {
                tol: 1e-14,
                ..KrylovOptions::default()
            },
        }
    }
}

fn check_grid(times: &[f64]) -> Result<()> {
    if times.is_empty() {
        return Err(DynamicsError::TimeGrid("empty".into()));
    }
    if let Some(t) = times.iter().find(|t| !t.is_finite() || **t < 0.0) {
        return Err(DynamicsError::TimeGrid(format!("time {t} must be finite and >= 0")));
    }
    if let Some(w) = times.windows(2).find(|w| w[1] <= w[0]) {
        return Err(DynamicsError::TimeGrid(format!("not strictly increasing at {} -> {}", w[0], w[1])));
    }
    Ok(())
}

/// Lists every violated physicality check of a `d×d` density matrix.
pub fn physicality_violations(rho: &DenseMatrix, d: usize, tol: f64) -> Vec<String> {
    let mut out = Vec::new();
    if rho.dim() != (d, d) {
        out.push(format!("shape {:?}, expected {d}x{d}", rho.dim()));
        return out;
    }
    if !rho.is_finite() {
        out.push("non-finite entries".into());
        return out;
    }
    let tr = rho.trace();
    if (tr - C64::new(1.0, 0.0)).norm() > tol {
        out.push(format!("trace {tr} differs from 1"));
    }
    let herm = rho.hermitian_defect();
    if herm > tol {
        out.push(format!("Hermiticity defect {herm:e}"));
    }
    match eigh(rho) {
        Ok(e) if e.values[0] < -tol => out.push(format!("negative eigenvalue {:e}", e.values[0])),
        Ok(_) => {}
        Err(e) => out.push(format!("eigenvalues unavailable: {e}")),
    }
    out
}

fn record(diag: &mut StepDiagnostics, rho: &DenseMatrix) -> Result<()> {
    diag.max_trace_defect = diag.max_trace_defect.max((rho.trace() - C64::new(1.0, 0.0)).norm());
    diag.max_hermitian_defect = diag.max_hermitian_defect.max(rho.hermitian_defect());
    diag.min_eigenvalue = diag.min_eigenvalue.min(eigh(rho)?.values[0]);
    Ok(())
}

/// Dense propagators keyed by step length, matched to a relative `1e-12`.
struct PropagatorCache<'a> {
    generator: &'a DenseMatrix,
    entries: Vec<(f64, DenseMatrix)>,
}

impl PropagatorCache<'_> {
    fn get(&mut self, h: f64) -> Result<&DenseMatrix> {
        let hit = self.entries.iter().position(|(k, _)| (k - h).abs() <= 1e-12 * h.abs());
        let idx = match hit {
            Some(i) => i,
            None => {
                self.entries.push((h, expm(&self.generator.scale_real(h))?));
                self.entries.len() - 1
            }
        };
        Ok(&self.entries[idx].1)
    }
}

/// `ρ(t) = unvec(exp(L t) vec ρ0)` sampled on `times`.
pub fn evolve_full(
    bundle: &LiouvillianBundle,
    rho0: &DenseMatrix,
    times: &[f64],
    opts: EvolveOptions,
) -> Result<Trajectory<DenseMatrix>> {
    check_grid(times)?;
    let d = bundle.dim();
    let bad = physicality_violations(rho0, d, PHYSICAL_TOL);
    if !bad.is_empty() {
        return Err(DynamicsError::NotPhysical(bad));
    }
    let max_step = opts.max_step.unwrap_or(0.01 / bundle.rates.r1());
    let dense = d * d <= opts.dense_limit;
    let mut diag = StepDiagnostics {
        min_eigenvalue: f64::INFINITY,
        ..Default::default()
    };
    let generator = dense.then(|| bundle.dense_superop());
    let mut cache = generator.as_ref().map(|g| PropagatorCache {
        generator: g,
        entries: Vec::new(),
    });

    let mut v = rho0.vectorize();
    let mut t_now = 0.0;
    let mut states = Vec::with_capacity(times.len());
    for &t in times {
        let h = t - t_now;
        if h > 0.0 {
            match cache.as_mut() {
                Some(cache) => {
                    let k = ((h / max_step) * (1.0 - 1e-12)).ceil().max(1.0) as usize;
                    let p = cache.get(h / k as f64)?;
                    for _ in 0..k {
                        v = p.mul_vec(&v);
                    }
                    diag.steps += k;
                }
                None => {
                    v = expm_action(&bundle.superop, &v, h, opts.krylov)?;
                    diag.steps += 1;
                }
            }
        }
        t_now = t;
        let rho = DenseMatrix::unvectorize(&v, d)?;
        record(&mut diag, &rho)?;
        states.push(rho);
    }
    diag.propagators = cache.map_or(0, |c| c.entries.len());
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        method: if dense { Method::DensePropagator } else { Method::Krylov },
        diagnostics: diag,
    })
}

/// Generator `A` and inhomogeneity `b` of the reduced system.
pub fn bloch_generator(rates: &RateSet, alpha: f64) -> ([[f64; 3]; 3], [f64; 3]) {
    let (r1, m0) = (rates.r1(), rates.m0);
    let a = [
        [-2.0 * r1, 0.0, 4.0 * m0 * alpha * r1],
        [m0 * r1, -4.0 * r1, 2.0 * alpha * r1],
        [-m0 * alpha * r1, 4.0 * alpha * r1, -2.0 * r1],
    ];
    (a, [2.0 * m0 * r1, 0.0, 0.0])
}

fn is_critical(alpha: f64) -> bool {
    (1.0 - alpha).abs() <= CRITICAL_ALPHA_TOL
}

fn real_matrix<const N: usize>(rows: [[f64; N]; N]) -> DenseMatrix {
    DenseMatrix::from_fn(N, N, |i, j| C64::new(rows[i][j], 0.0))
}

/// Exact solution of the reduced system on `times`.
pub fn evolve_bloch(rates: &RateSet, alpha: f64, x0: BlochState, times: &[f64]) -> Result<Trajectory<BlochState>> {
    check_grid(times)?;
    let (a, b) = bloch_generator(rates, alpha);
    let am = real_matrix(a);
    let shift = if is_critical(alpha) {
        None
    } else {
        let rhs = DenseMatrix::from_fn(3, 1, |i, _| C64::new(-b[i], 0.0));
        solve(&am, &rhs).ok()
    };
    let x = x0.to_array();
    let states = match shift {
        Some(xs) => {
            let fixed = [xs[(0, 0)].re, xs[(1, 0)].re, xs[(2, 0)].re];
            let dev: Vec<C64> = (0..3).map(|i| C64::new(x[i] - fixed[i], 0.0)).collect();
            times
                .iter()
                .map(|&t| {
                    let y = expm(&am.scale_real(t))?.mul_vec(&dev);
                    Ok(BlochState::new(y[0].re + fixed[0], y[1].re + fixed[1], y[2].re + fixed[2]))
                })
                .collect::<Result<Vec<_>>>()?
        }
        None => {
            // affine embedding: d/dt (x, 1) = [[A, b], [0, 0]] (x, 1)
            let aug = DenseMatrix::from_fn(4, 4, |i, j| match (i, j) {
                (3, _) => ZERO,
                (_, 3) => C64::new(b[i], 0.0),
                _ => C64::new(a[i][j], 0.0),
            });
            let start = [x[0], x[1], x[2], 1.0].map(|v| C64::new(v, 0.0));
            times
                .iter()
                .map(|&t| {
                    let y = expm(&aug.scale_real(t))?.mul_vec(&start);
                    Ok(BlochState::new(y[0].re, y[1].re, y[2].re))
                })
                .collect::<Result<Vec<_>>>()?
        }
    };
    Ok(Trajectory {
        times: times.to_vec(),
        states,
        method: Method::BlochExpm,
        diagnostics: StepDiagnostics {
            steps: times.len(),
            ..Default::default()
        },
    })
}

/// Long-time limit of the reduced system: the thermal point away from full
/// correlation, and the initial-value-dependent point at `α = 1`.
pub fn bloch_steady_state(rates: &RateSet, alpha: f64, x0: BlochState) -> BlochState {
    let m0 = rates.m0;
    if !is_critical(alpha) {
        return BlochState::thermal(m0);
    }
    critical_steady_state(m0, x0.conserved())
}

/// The `α = 1` fixed point reached from any state with `M_zz + M_c = f`.
pub fn critical_steady_state(m0: f64, f: f64) -> BlochState {
    let den = m0 * m0 + 3.0;
    let mz = m0 * (4.0 * f + 3.0) / den;
    let mc = (4.0 * f - m0 * m0) / (2.0 * den);
    BlochState::new(mz, f - mc, mc)
}

fn expect(rho: &DenseMatrix, op: &DenseMatrix) -> f64 {
    (rho * op).trace().re
}

fn pair(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    kron(a, b).expect("two-qubit operator")
}

/// `(M_z, M_zz, M_c)` of a two-qubit density matrix.
pub fn bloch_from_density(rho: &DenseMatrix) -> Result<BlochState> {
    if rho.dim() != (4, 4) {
        return Err(LinalgError::Shape(format!("expected a 4x4 two-qubit state, got {:?}", rho.dim())).into());
    }
    let id = DenseMatrix::identity(2);
    let (x, y, z) = (sigma_x(), sigma_y(), sigma_z());
    let mz = 0.5 * expect(rho, &(&pair(&z, &id) + &pair(&id, &z)));
    let mzz = 0.25 * expect(rho, &pair(&z, &z));
    let mc = 0.25 * expect(rho, &(&pair(&x, &x) + &pair(&y, &y)));
    Ok(BlochState::new(mz, mzz, mc))
}

/// The six exchange-antisymmetric observables `M_a^(−)` (a = x, y, z) and
/// `M_ab^(−)` (ab = xy, xz, yz).
pub fn asymmetric_observables(rho: &DenseMatrix) -> Result<[f64; 6]> {
    if rho.dim() != (4, 4) {
        return Err(LinalgError::Shape(format!("expected a 4x4 two-qubit state, got {:?}", rho.dim())).into());
    }
    let id = DenseMatrix::identity(2);
    let s = [sigma_x(), sigma_y(), sigma_z()];
    let single = |a: &DenseMatrix| 0.5 * expect(rho, &(&pair(a, &id) - &pair(&id, a)));
    let double = |a: &DenseMatrix, b: &DenseMatrix| 0.25 * expect(rho, &(&pair(a, b) - &pair(b, a)));
    Ok([
        single(&s[0]),
        single(&s[1]),
        single(&s[2]),
        double(&s[0], &s[1]),
        double(&s[0], &s[2]),
        double(&s[1], &s[2]),
    ])
}

/// Reduced state of spins `i` and `j` of `n`, then its Bloch values.
pub fn pair_bloch(rho: &DenseMatrix, n: usize, i: usize, j: usize) -> Result<BlochState> {
    let reduced = partial_trace(rho, &[i.min(j), i.max(j)], &vec![2; n])?;
    bloch_from_density(&reduced)
}

/// The exchange-symmetric, phase-invariant two-qubit state with the given
/// Bloch values: `¼[I + M_z(σz⊗I + I⊗σz) + 4M_zz σz⊗σz + 2M_c(σx⊗σx + σy⊗σy)]`.
pub fn density_from_bloch(x: BlochState) -> DenseMatrix {
    let id = DenseMatrix::identity(2);
    let (sx, sy, sz) = (sigma_x(), sigma_y(), sigma_z());
    let mut rho = DenseMatrix::identity(4);
    rho += &(&pair(&sz, &id) + &pair(&id, &sz)).scale_real(x.mz);
    rho += &pair(&sz, &sz).scale_real(4.0 * x.mzz);
    rho += &(&pair(&sx, &sx) + &pair(&sy, &sy)).scale_real(2.0 * x.mc);
    rho.scale_real(0.25)
}

/// Named initial states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case", tag = "kind")]
pub enum InitialState {
    /// Every spin in `|0⟩` (`σz = +1`).
    AllUp,
    AllDown,
    /// Singlets on sites `(0,1), (2,3), …`; needs even `n`.
    SingletPairs,
    /// Product of single-spin states with the given Bloch vectors.
    Product { bloch: Vec<[f64; 3]> },
    MaximallyMixed,
    /// `⊗ (I + m0 σz)/2` at the model's equilibrium magnetization.
    Thermal,
    /// Seeded random mixed state (Ginibre-type).
    Random { seed: u64 },
    /// Seeded random state symmetrized under the exchange of every spin pair
    /// (two spins only).
    RandomSymmetric { seed: u64 },
}

impl InitialState {
    pub fn name(&self) -> String {
        match self {
            InitialState::AllUp => "all-up".into(),
            InitialState::AllDown => "all-down".into(),
            InitialState::SingletPairs => "singlet-pairs".into(),
            InitialState::Product { .. } => "product".into(),
            InitialState::MaximallyMixed => "maximally-mixed".into(),
            InitialState::Thermal => "thermal".into(),
            InitialState::Random { seed } => format!("random:{seed}"),
            InitialState::RandomSymmetric { seed } => format!("random-symmetric:{seed}"),
        }
    }

    pub fn density(&self, n: usize, m0: f64) -> Result<DenseMatrix> {
        let d = 1usize << n;
        match self {
            InitialState::AllUp => Ok(basis_projector(d, 0)),
            InitialState::AllDown => Ok(basis_projector(d, d - 1)),
            InitialState::MaximallyMixed => Ok(DenseMatrix::identity(d).scale_real(1.0 / d as f64)),
            InitialState::Thermal => product_state(&vec![[0.0, 0.0, m0]; n]),
            InitialState::Product { bloch } => {
                if bloch.len() != n {
                    return Err(DynamicsError::Preset(format!("{} Bloch vectors for {n} spins", bloch.len())));
                }
                if let Some(v) = bloch.iter().find(|v| v.iter().map(|x| x * x).sum::<f64>() > 1.0 + 1e-12) {
                    return Err(DynamicsError::Preset(format!("Bloch vector {v:?} is longer than 1")));
                }
                product_state(bloch)
            }
            InitialState::SingletPairs => {
                if !n.is_multiple_of(2) {
                    return Err(DynamicsError::Preset(format!("singlet pairs need an even spin count, got {n}")));
                }
                let s = singlet();
                let factors: Vec<&DenseMatrix> = (0..n / 2).map(|_| &s).collect();
                Ok(kron_all(&factors)?)
            }
            InitialState::Random { seed } => Ok(random_density(d, *seed)),
            InitialState::RandomSymmetric { seed } => {
                if n != 2 {
                    return Err(DynamicsError::Preset("random-symmetric is defined for two spins".into()));
                }
                Ok(symmetrize_pair(&random_density(4, *seed)))
            }
        }
    }
}

fn basis_projector(d: usize, k: usize) -> DenseMatrix {
    let mut m = DenseMatrix::zeros(d, d);
    m[(k, k)] = C64::new(1.0, 0.0);
    m
}

/// `(I + r·σ)/2` per spin, tensored in site order.
fn product_state(bloch: &[[f64; 3]]) -> Result<DenseMatrix> {
    let singles: Vec<DenseMatrix> = bloch
        .iter()
        .map(|r| {
            let mut m = DenseMatrix::identity(2);
            m += &sigma_x().scale_real(r[0]);
            m += &sigma_y().scale_real(r[1]);
            m += &sigma_z().scale_real(r[2]);
            m.scale_real(0.5)
        })
        .collect();
    let refs: Vec<&DenseMatrix> = singles.iter().collect();
    Ok(kron_all(&refs)?)
}

/// `|ψ⁻⟩⟨ψ⁻|` with `|ψ⁻⟩ = (|01⟩ − |10⟩)/√2`.
pub fn singlet() -> DenseMatrix {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let psi = [ZERO, C64::new(s, 0.0), C64::new(-s, 0.0), ZERO];
    DenseMatrix::outer(&psi, &psi)
}

/// `G G† / Tr(G G†)` with `G` filled from a seeded uniform distribution.
pub fn random_density(d: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = DenseMatrix::from_fn(d, d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)));
    let w = &g * &g.adjoint();
    let tr = w.trace().re;
    w.scale_real(1.0 / tr)
}

/// `(ρ + PρP)/2` with `P` the two-qubit swap.
pub fn symmetrize_pair(rho: &DenseMatrix) -> DenseMatrix {
    let p = [0usize, 2, 1, 3];
    let swapped = DenseMatrix::from_fn(4, 4, |i, j| rho[(p[i], p[j])]);
    (rho + &swapped).scale_real(0.5)
}
