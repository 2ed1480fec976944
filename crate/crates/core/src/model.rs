//! Physical parameters and the spatial bath-correlation model.
//!
//! The bath correlation length is `ξ = 2·ω·β·g_b` (lattice spacing `ω`, inverse
//! temperature `β`, bath hopping `g_b`). Two spins a distance `r` apart share
//! the bath to the degree `α(r) = exp(-r/ξ)`, and every cross rate is the
//! on-site rate scaled by that factor. The on-site rates `A(0)`, `B(0)` split
//! `R1` by detailed balance: `B(0)/A(0) = exp(β ω₀)`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest number of spins the dense superoperator path accepts.
pub const MAX_SPINS: usize = 7;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid parameter `{field}`: {reason}")]
    Invalid { field: &'static str, reason: String },
    #[error("{n} spins exceed the supported maximum of {max}")]
    Capacity { n: usize, max: usize },
}

/// Inverse temperature; `Infinite` is the exact `T = 0` point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum Beta {
    Finite(f64),
    Infinite,
}

impl Beta {
    pub fn from_temperature(t: f64) -> Self {
        if t == 0.0 {
            Beta::Infinite
        } else {
            Beta::Finite(1.0 / t)
        }
    }

    /// The inverse temperature at which the equilibrium magnetization
    /// `tanh(β ω₀ / 2)` equals `m0`.
    pub fn for_magnetization(m0: f64, omega0: f64) -> Self {
        if m0 >= 1.0 {
            Beta::Infinite
        } else {
            Beta::Finite(2.0 * m0.atanh() / omega0)
        }
    }

    pub fn temperature(self) -> f64 {
        match self {
            Beta::Finite(b) => 1.0 / b,
            Beta::Infinite => 0.0,
        }
    }

    pub fn is_zero_temperature(self) -> bool {
        matches!(self, Beta::Infinite)
    }
}

/// How pair correlations are obtained.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Coupling {
    /// 1D coordinates of each spin.
    Positions(Vec<f64>),
    /// Spins on a line with a fixed spacing.
    UniformSeparation(f64),
    /// The same `α` for every distinct pair, bypassing geometry.
    AlphaOverride(f64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub n_spins: usize,
    /// Zeeman angular frequency (ħ = 1).
    pub omega0: f64,
    pub beta: Beta,
    /// Bath lattice spacing `ω` entering the correlation length.
    pub bath_spacing: f64,
    /// Coupling `g_b` between neighbouring bath oscillators.
    pub bath_hopping: f64,
    /// Base relaxation rate `R1 = A(0) + B(0)`.
    pub r1: f64,
    pub coupling: Coupling,
    pub lamb_j0: f64,
    pub lamb_k0: f64,
}

impl ModelSpec {
    /// Spins with a uniform pair correlation `alpha`, at the temperature that
    /// gives equilibrium magnetization `m0` (with `ω₀ = 1`).
    pub fn with_alpha(n_spins: usize, r1: f64, m0: f64, alpha: f64) -> Self {
        Self {
            n_spins,
            omega0: 1.0,
            beta: Beta::for_magnetization(m0, 1.0),
            bath_spacing: 1.0,
            bath_hopping: 1.0,
            r1,
            coupling: Coupling::AlphaOverride(alpha),
            lamb_j0: 0.0,
            lamb_k0: 0.0,
        }
    }

    /// Collects every violated constraint.
    pub fn validate(&self) -> Result<(), Vec<ModelError>> {
        let mut errs = Vec::new();
        let mut bad = |field: &'static str, reason: String| errs.push(ModelError::Invalid { field, reason });
        if self.n_spins == 0 {
            bad("n_spins", "must be at least 1".into());
        }
        if !(self.r1 > 0.0 && self.r1.is_finite()) {
            bad("r1", format!("must be positive and finite, got {}", self.r1));
        }
        if !self.omega0.is_finite() {
            bad("omega0", "must be finite".into());
        }
        if let Beta::Finite(b) = self.beta {
            if !(b >= 0.0 && b.is_finite()) {
                bad("beta", format!("must be >= 0 (use the infinite sentinel for T = 0), got {b}"));
            }
        }
        if !(self.bath_spacing >= 0.0 && self.bath_spacing.is_finite()) {
            bad("bath_spacing", "must be finite and >= 0".into());
        }
        if !(self.bath_hopping >= 0.0 && self.bath_hopping.is_finite()) {
            bad("bath_hopping", "must be finite and >= 0".into());
        }
        if !self.lamb_j0.is_finite() {
            bad("lamb_j0", "must be finite".into());
        }
        if !self.lamb_k0.is_finite() {
            bad("lamb_k0", "must be finite".into());
        }
        match &self.coupling {
            Coupling::AlphaOverride(a) => {
                if !(0.0..=1.0).contains(a) {
                    bad("alpha_override", format!("must lie in [0, 1], got {a}"));
                }
            }
            Coupling::UniformSeparation(r) => {
                if !(*r >= 0.0 && r.is_finite()) {
                    bad("uniform_separation", format!("must be finite and >= 0, got {r}"));
                }
            }
            Coupling::Positions(p) => {
                if p.len() != self.n_spins {
                    bad("positions", format!("{} coordinates for {} spins", p.len(), self.n_spins));
                }
                if p.iter().any(|x| !x.is_finite()) {
                    bad("positions", "coordinates must be finite".into());
                }
            }
        }
        if self.n_spins > MAX_SPINS {
            errs.push(ModelError::Capacity {
                n: self.n_spins,
                max: MAX_SPINS,
            });
        }
        if errs.is_empty() {
            Ok(())
        } else {
            Err(errs)
        }
    }

    fn position(&self, i: usize) -> f64 {
        match &self.coupling {
            Coupling::Positions(p) => p[i],
            Coupling::UniformSeparation(r) => r * i as f64,
            Coupling::AlphaOverride(_) => 0.0,
        }
    }
}

/// Correlation length `ξ = 2ωβg_b`; infinite at `T = 0`.
pub fn correlation_length(spec: &ModelSpec) -> f64 {
    match spec.beta {
        Beta::Infinite => f64::INFINITY,
        Beta::Finite(b) => 2.0 * spec.bath_spacing * b * spec.bath_hopping,
    }
}

/// `exp(-r/ξ)` with the limits `r = 0 → 1`, `ξ = ∞ → 1`, `ξ = 0, r > 0 → 0`.
pub fn alpha_at(separation: f64, xi: f64) -> f64 {
    if separation == 0.0 || xi.is_infinite() {
        1.0
    } else if xi == 0.0 {
        0.0
    } else {
        (-separation / xi).exp()
    }
}

/// Correlation factor between sites `i` and `j`.
pub fn alpha_of(spec: &ModelSpec, i: usize, j: usize) -> f64 {
    if i == j {
        return 1.0;
    }
    if let Coupling::AlphaOverride(a) = spec.coupling {
        return a;
    }
    let r = (spec.position(i) - spec.position(j)).abs();
    alpha_at(r, correlation_length(spec))
}

/// Symmetric matrix of pair correlations with unit diagonal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlphaMatrix {
    n: usize,
    entries: Vec<f64>,
}

impl AlphaMatrix {
    pub fn uniform(n: usize, alpha: f64) -> Self {
        Self::from_fn(n, |_, _| alpha)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut entries = vec![0.0; n * n];
        for i in 0..n {
            entries[i * n + i] = 1.0;
            for j in i + 1..n {
                let a = f(i, j);
                entries[i * n + j] = a;
                entries[j * n + i] = a;
            }
        }
        Self { n, entries }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n + j]
    }
}

/// On-site rates and pair correlations entering the dissipator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSet {
    pub a0: f64,
    pub b0: f64,
    pub m0: f64,
    pub alpha: AlphaMatrix,
}

impl RateSet {
    /// Splits `r1` so that `a0 + b0 = r1` and `(b0 - a0)/(b0 + a0) = m0`.
    pub fn from_magnetization(r1: f64, m0: f64, alpha: AlphaMatrix) -> Self {
        Self {
            a0: r1 * (1.0 - m0) / 2.0,
            b0: r1 * (1.0 + m0) / 2.0,
            m0,
            alpha,
        }
    }

    pub fn r1(&self) -> f64 {
        self.a0 + self.b0
    }

    /// `A_ij = α_ij·A(0)`.
    pub fn a(&self, i: usize, j: usize) -> f64 {
        self.alpha.get(i, j) * self.a0
    }

    /// `B_ij = α_ij·B(0)`.
    pub fn b(&self, i: usize, j: usize) -> f64 {
        self.alpha.get(i, j) * self.b0
    }
}

/// Equilibrium magnetization `tanh(βω₀/2)`, exactly 1 at `T = 0`.
pub fn equilibrium_magnetization(beta: Beta, omega0: f64) -> f64 {
    match beta {
        Beta::Infinite => 1.0,
        Beta::Finite(b) => (b * omega0 / 2.0).tanh(),
    }
}

pub fn rates_from_spec(spec: &ModelSpec) -> RateSet {
    let m0 = equilibrium_magnetization(spec.beta, spec.omega0);
    let alpha = AlphaMatrix::from_fn(spec.n_spins, |i, j| alpha_of(spec, i, j));
    RateSet::from_magnetization(spec.r1, m0, alpha)
}
