//! Parameter sweeps: steady-state observables against temperature, steady-state
//! entropy against spin count, and eigenvalue clouds against correlation.
//!
//! The transition sits at the boundary `T = 0`, so a temperature sweep does
//! not look for a divergence inside the grid. It reports the jump between the
//! exact `T = 0` row and the smallest positive temperature, and the slope
//! `|ΔM_c/ΔT|` across that gap, which grows like `1/T_min` when the jump is
//! nonzero.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{
    bloch_steady_state, density_from_bloch, evolve_full, pair_bloch, BlochState, DynamicsError, EvolveOptions,
    InitialState,
};
use crate::linalg::{eig_general, LinalgError};
use crate::liouvillian::{assemble_liouvillian, LiouvillianError};
use crate::measures::{binary_entropy, concurrence, purity, von_neumann_entropy, MeasuresError};
use crate::model::{alpha_of, equilibrium_magnetization, rates_from_spec, Beta, Coupling, ModelSpec, MAX_SPINS};
use crate::spectra::ZeroTolerance;

/// Time, in units of `1/R1`, at which long-time states are read off.
pub const DEFAULT_SETTLE_TIME: f64 = 50.0;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("invalid grid: {0}")]
    Grid(String),
    #[error("{n} spins exceed the supported maximum of {max}")]
    Capacity { n: usize, max: usize },
    #[error("temperature sweeps use the two-spin reduced system, got {0} spins")]
    NotAPair(usize),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Liouvillian(#[from] LiouvillianError),
    #[error(transparent)]
    Measures(#[from] MeasuresError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

pub type Result<T> = std::result::Result<T, ScanError>;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservableRecord {
    /// Bloch values of spins 0 and 1 (absent for a single spin).
    pub bloch: Option<BlochState>,
    pub concurrence: Option<f64>,
    pub entropy: f64,
    pub purity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    /// Value on the sweep axis.
    pub x: f64,
    pub alpha: f64,
    pub m0: f64,
    pub observables: ObservableRecord,
    /// Central differences `d(M_z, M_zz, M_c)/dx`; absent at the ends.
    pub derivative: Option<[f64; 3]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryJump {
    pub t_min: f64,
    /// Row at `T = 0` minus the row at `T_min`.
    pub jump: BlochState,
    /// `|ΔM_c| / T_min`.
    pub mc_slope: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepMetadata {
    pub spec: ModelSpec,
    pub initial_state: String,
    pub settle_time: Option<f64>,
    pub zero_tolerance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub axis: String,
    pub rows: Vec<SweepRow>,
    pub boundary: Option<BoundaryJump>,
    pub metadata: SweepMetadata,
}

fn pair_record(x: BlochState) -> Result<ObservableRecord> {
    let rho = density_from_bloch(x);
    Ok(ObservableRecord {
        bloch: Some(x),
        concurrence: Some(concurrence(&rho)?),
        entropy: von_neumann_entropy(&rho)?,
        purity: purity(&rho),
    })
}

/// Central differences on the interior of `xs`.
fn central_differences(xs: &[f64], ys: &[[f64; 3]]) -> Vec<Option<[f64; 3]>> {
    (0..xs.len())
        .map(|k| {
            if k == 0 || k + 1 == xs.len() {
                return None;
            }
            let h = xs[k + 1] - xs[k - 1];
            Some([0, 1, 2].map(|c| (ys[k + 1][c] - ys[k - 1][c]) / h))
        })
        .collect()
}

fn with_beta(spec: &ModelSpec, beta: Beta) -> ModelSpec {
    ModelSpec { beta, ..spec.clone() }
}

/// Steady state of a spin pair on a positive temperature grid, followed by
/// the exact `T = 0` row. `x0` selects the critical branch's fixed point.
pub fn temperature_sweep(template: &ModelSpec, t_grid: &[f64], x0: BlochState, preset: &str) -> Result<SweepResult> {
    if template.n_spins != 2 {
        return Err(ScanError::NotAPair(template.n_spins));
    }
    if t_grid.is_empty() {
        return Err(ScanError::Grid("empty temperature grid".into()));
    }
    if t_grid.iter().any(|t| !(t.is_finite() && *t > 0.0)) {
        return Err(ScanError::Grid("temperatures must be positive and finite; T = 0 is added separately".into()));
    }
    if t_grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(ScanError::Grid("temperatures must decrease strictly".into()));
    }
    let point = |beta: Beta| -> Result<(f64, f64, ObservableRecord)> {
        let spec = with_beta(template, beta);
        let rates = rates_from_spec(&spec);
        let alpha = alpha_of(&spec, 0, 1);
        let x = bloch_steady_state(&rates, alpha, x0);
        Ok((alpha, rates.m0, pair_record(x)?))
    };
    let mut points: Vec<(f64, f64, f64, ObservableRecord)> = t_grid
        .par_iter()
        .map(|&t| point(Beta::from_temperature(t)).map(|(a, m, r)| (t, a, m, r)))
        .collect::<Result<_>>()?;
    let (a0, m00, r0) = point(Beta::Infinite)?;
    points.push((0.0, a0, m00, r0));

    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let ys: Vec<[f64; 3]> = points.iter().map(|p| p.3.bloch.expect("pair rows").to_array()).collect();
    // the T = 0 row is a separate branch: differences stop at the last T > 0 row
    let mut derivative = central_differences(&xs[..xs.len() - 1], &ys[..ys.len() - 1]);
    derivative.push(None);

    let t_min = *t_grid.last().unwrap();
    let (last, zero) = (ys[ys.len() - 2], ys[ys.len() - 1]);
    let jump = BlochState::new(zero[0] - last[0], zero[1] - last[1], zero[2] - last[2]);
    let rows = points
        .into_iter()
        .zip(derivative)
        .map(|((x, alpha, m0, observables), derivative)| SweepRow {
            x,
            alpha,
            m0,
            observables,
            derivative,
        })
        .collect();
    Ok(SweepResult {
        axis: "temperature".into(),
        rows,
        boundary: Some(BoundaryJump {
            t_min,
            jump,
            mc_slope: jump.mc.abs() / t_min,
        }),
        metadata: SweepMetadata {
            spec: template.clone(),
            initial_state: preset.into(),
            settle_time: None,
            zero_tolerance: None,
        },
    })
}

/// `T_k = t0·2^{-k}` for `k = 0..=k_max`.
pub fn geometric_temperatures(t0: f64, k_max: u32) -> Vec<f64> {
    (0..=k_max).map(|k| t0 * 0.5f64.powi(k as i32)).collect()
}

#[derive(Debug, Clone)]
pub struct EntropyScanOptions {
    /// Correlation of the separate-bath column.
    pub alpha_low: f64,
    pub preset: InitialState,
    pub settle_time: f64,
    pub evolve: EvolveOptions,
}

impl Default for EntropyScanOptions {
    fn default() -> Self {
        Self {
            alpha_low: 0.5,
            preset: InitialState::AllUp,
            settle_time: DEFAULT_SETTLE_TIME,
            evolve: EvolveOptions::default(),
        }
    }
}

fn full_record(rho: &crate::linalg::DenseMatrix, n: usize) -> Result<ObservableRecord> {
    let bloch = if n >= 2 { Some(pair_bloch(rho, n, 0, 1)?) } else { None };
    let concurrence = if n == 2 { Some(concurrence(rho)?) } else { None };
    Ok(ObservableRecord {
        bloch,
        concurrence,
        entropy: von_neumann_entropy(rho)?,
        purity: purity(rho),
    })
}

/// Steady-state entropy against spin count. For each `n` the separate-bath
/// column (`α = alpha_low < 1`) is the Gibbs product, and the common-bath
/// column (`α = 1`) is the state reached from `preset` after `settle_time`.
/// Rows alternate `alpha_low`, `1` per `n`.
pub fn entropy_vs_n(template: &ModelSpec, n_grid: &[usize], opts: &EntropyScanOptions) -> Result<SweepResult> {
    if let Some(&n) = n_grid.iter().find(|&&n| n > MAX_SPINS) {
        return Err(ScanError::Capacity { n, max: MAX_SPINS });
    }
    if n_grid.contains(&0) {
        return Err(ScanError::Grid("spin counts must be positive".into()));
    }
    if opts.alpha_low >= 1.0 {
        return Err(ScanError::Grid(format!("alpha_low must be below 1, got {}", opts.alpha_low)));
    }
    let m0 = equilibrium_magnetization(template.beta, template.omega0);
    let rows: Vec<[SweepRow; 2]> = n_grid
        .par_iter()
        .map(|&n| {
            let gibbs = InitialState::Thermal.density(n, m0)?;
            let low = SweepRow {
                x: n as f64,
                alpha: opts.alpha_low,
                m0,
                observables: full_record(&gibbs, n)?,
                derivative: None,
            };
            let spec = ModelSpec {
                n_spins: n,
                coupling: Coupling::AlphaOverride(1.0),
                ..template.clone()
            };
            let bundle = assemble_liouvillian(&spec)?;
            let rho0 = opts.preset.density(n, m0)?;
            let tr = evolve_full(&bundle, &rho0, &[opts.settle_time / spec.r1], opts.evolve)?;
            let high = SweepRow {
                x: n as f64,
                alpha: 1.0,
                m0,
                observables: full_record(&tr.states[0], n)?,
                derivative: None,
            };
            Ok([low, high])
        })
        .collect::<Result<_>>()?;
    Ok(SweepResult {
        axis: "n".into(),
        rows: rows.into_iter().flatten().collect(),
        boundary: None,
        metadata: SweepMetadata {
            spec: template.clone(),
            initial_state: opts.preset.name(),
            settle_time: Some(opts.settle_time),
            zero_tolerance: None,
        },
    })
}

/// Entropy of `n` independent thermal spins, `n·h((1 + m0)/2)`.
pub fn volume_law_entropy(n: usize, m0: f64) -> f64 {
    n as f64 * binary_entropy(m0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CloudRow {
    pub alpha: f64,
    pub re_lambda: f64,
    pub im_lambda: f64,
    pub is_zero_mode: bool,
}

/// Liouvillian eigenvalues for each correlation value, in input order.
pub fn spectrum_cloud(template: &ModelSpec, alphas: &[f64], tol: ZeroTolerance) -> Result<Vec<CloudRow>> {
    let per_alpha: Vec<Vec<CloudRow>> = alphas
        .par_iter()
        .map(|&alpha| {
            let spec = ModelSpec {
                coupling: Coupling::AlphaOverride(alpha),
                ..template.clone()
            };
            let bundle = assemble_liouvillian(&spec)?;
            let threshold = tol.threshold(bundle.superop.norm_one());
            let mut ev = eig_general(&bundle.dense_superop(), false)?.values;
            ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
            Ok(ev
                .into_iter()
                .map(|z| CloudRow {
                    alpha,
                    re_lambda: z.re,
                    im_lambda: z.im,
                    is_zero_mode: z.norm() <= threshold,
                })
                .collect())
        })
        .collect::<Result<_>>()?;
    Ok(per_alpha.into_iter().flatten().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair_on_line() -> ModelSpec {
        ModelSpec {
            n_spins: 2,
            omega0: 1.0,
            beta: Beta::Finite(1.0),
            bath_spacing: 1.0,
            bath_hopping: 1.0,
            r1: 1.0,
            coupling: Coupling::Positions(vec![0.0, 1.0]),
            lamb_j0: 0.0,
            lamb_k0: 0.0,
        }
    }

    #[test]
    fn coarse_sweep_rows() {
        let x0 = BlochState::new(0.0, 0.0, 0.0);
        let s = temperature_sweep(&pair_on_line(), &[2.0, 1.0, 0.5], x0, "maximally-mixed").unwrap();
        assert_eq!(s.rows.len(), 4);
        for row in &s.rows[..3] {
            let b = row.observables.bloch.unwrap();
            assert!((b.mz - (0.5 / row.x).tanh()).abs() < 1e-15);
            assert_eq!(b.mc, 0.0);
            assert!(row.alpha < 1.0);
        }
        assert!(s.rows[0].derivative.is_none());
        assert!(s.rows[1].derivative.is_some());
        assert!(s.rows[2].derivative.is_none());
        let zero = &s.rows[3];
        assert_eq!((zero.x, zero.alpha, zero.m0), (0.0, 1.0, 1.0));
        assert!(zero.derivative.is_none());
        // M_c = (4F − 1)/8 at M₀ = 1 with F = 0
        assert!((zero.observables.bloch.unwrap().mc + 0.125).abs() < 1e-15);
        let b = s.boundary.unwrap();
        assert!((b.jump.mc + 0.125).abs() < 1e-15);
        assert!((b.mc_slope - 0.25).abs() < 1e-15);
    }

    #[test]
    fn sweep_rejects_bad_grids() {
        let x0 = BlochState::dark();
        assert!(temperature_sweep(&pair_on_line(), &[1.0, 2.0], x0, "").is_err());
        assert!(temperature_sweep(&pair_on_line(), &[1.0, 0.0], x0, "").is_err());
        let three = ModelSpec {
            n_spins: 3,
            coupling: Coupling::UniformSeparation(1.0),
            ..pair_on_line()
        };
        assert!(matches!(temperature_sweep(&three, &[1.0], x0, ""), Err(ScanError::NotAPair(3))));
    }

    #[test]
    fn entropy_columns_small_n() {
        let spec = ModelSpec::with_alpha(1, 1.0, 0.6, 0.5);
        let s = entropy_vs_n(&spec, &[1, 2, 3], &EntropyScanOptions::default()).unwrap();
        assert_eq!(s.rows.len(), 6);
        for pair in s.rows.chunks(2) {
            let n = pair[0].x as usize;
            assert!((pair[0].observables.entropy - volume_law_entropy(n, 0.6)).abs() < 1e-12);
            if n == 1 {
                assert!((pair[1].observables.entropy - pair[0].observables.entropy).abs() < 1e-8);
            } else {
                assert!(pair[1].observables.entropy < pair[0].observables.entropy);
            }
        }
        assert!(matches!(
            entropy_vs_n(&spec, &[8], &EntropyScanOptions::default()),
            Err(ScanError::Capacity { n: 8, max: 7 })
        ));
    }

    #[test]
    fn cloud_marks_zero_modes() {
        let spec = ModelSpec::with_alpha(2, 1.0, 0.5, 0.5);
        let rows = spectrum_cloud(&spec, &[0.5, 1.0], ZeroTolerance::default()).unwrap();
        assert_eq!(rows.len(), 32);
        let zeros = |a: f64| rows.iter().filter(|r| r.alpha == a && r.is_zero_mode).count();
        assert_eq!(zeros(0.5), 1);
        assert!(zeros(1.0) >= 2);
        assert!(rows.iter().all(|r| r.re_lambda <= 1e-10));
    }

    #[test]
    fn geometric_grid() {
        let g = geometric_temperatures(1.0, 3);
        assert_eq!(g, vec![1.0, 0.5, 0.25, 0.125]);
    }
}
