//! Command-line front end.
//!
//! Exit codes: 0 on success, 1 when the configuration or arguments are
//! invalid, 2 when a numerical-quality check fails (for example a state that
//! loses positivity beyond tolerance). Output lands in `--out`, else the
//! config's `output.directory`, else `$SPINBATH_OUT`, else `spinbath-out`.

pub mod config;
pub mod output;

use std::ffi::OsString;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use serde_json::json;
use thiserror::Error;

pub use config::{parse_config, parse_config_str, ConfigError, FieldError, NumericConfig, OutputConfig, OutputFormat, RunConfig};
pub use output::{format_float, Cell, FileRecord, OutputSink, Table};

use crate::dynamics::{
    bloch_from_density, bloch_steady_state, critical_steady_state, density_from_bloch, evolve_bloch, evolve_full,
    pair_bloch, random_density, singlet, symmetrize_pair, BlochState, DynamicsError, EvolveOptions, InitialState,
    Trajectory,
};
use crate::linalg::{eig_general, eigh, DenseMatrix, LinalgError, C64};
use crate::liouvillian::{assemble_liouvillian, check_weak_symmetry, LiouvillianError};
use crate::measures::{concurrence, purity, von_neumann_entropy, MeasuresError};
use crate::model::{alpha_of, equilibrium_magnetization, rates_from_spec, Coupling, ModelSpec};
use crate::scans::{
    entropy_vs_n, geometric_temperatures, spectrum_cloud, temperature_sweep, volume_law_entropy, CloudRow,
    EntropyScanOptions, ScanError, SweepResult,
};
use crate::spectra::{analyze, decay_rates, SpectraError, ZeroTolerance};

pub const OUT_DIR_ENV: &str = "SPINBATH_OUT";
pub const DEFAULT_OUT_DIR: &str = "spinbath-out";

/// Largest spin count for commands that diagonalize the dense superoperator.
pub const SPECTRUM_MAX_SPINS: usize = 4;

/// Positivity and trace limits applied to every evolved state.
pub const STATE_QUALITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Subcommand)]
pub enum Command {
    /// Liouvillian eigenvalues, zero modes and ADR.
    Spectrum,
    /// Full master-equation trajectory from the initial preset.
    Evolve,
    /// Steady states: kernel basis, long-time state and reduced prediction.
    Steady,
    /// Two-spin steady state against temperature, down to T = 0.
    SweepTemperature,
    /// Steady-state entropy against spin count.
    EntropyScan,
    /// Built-in invariant suite with a pass/fail table.
    Validate,
}

impl fmt::Display for Command {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Command::Spectrum => "spectrum",
            Command::Evolve => "evolve",
            Command::Steady => "steady",
            Command::SweepTemperature => "sweep-temperature",
            Command::EntropyScan => "entropy-scan",
            Command::Validate => "validate",
        })
    }
}

#[derive(Debug, Parser)]
#[command(name = "spinbath", version, about = "Qubits in a spatially correlated bosonic bath")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// TOML run configuration.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Zero-mode tolerance, used for both the absolute and relative parts.
    #[arg(long, global = true)]
    pub tol: Option<f64>,
    /// Worker threads for parallel sweeps.
    #[arg(long, global = true)]
    pub threads: Option<usize>,
}

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("{0}")]
    Usage(String),
    #[error("numerical quality: {0}")]
    Numerical(String),
    #[error("output: {0}")]
    Io(#[from] std::io::Error),
}

impl RunError {
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Numerical(_) => 2,
            _ => 1,
        }
    }
}

impl From<LinalgError> for RunError {
    fn from(e: LinalgError) -> Self {
        match e {
            LinalgError::Shape(_) | LinalgError::Capacity { .. } => RunError::Usage(e.to_string()),
            _ => RunError::Numerical(e.to_string()),
        }
    }
}

impl From<LiouvillianError> for RunError {
    fn from(e: LiouvillianError) -> Self {
        match e {
            LiouvillianError::Linalg(e) => e.into(),
            other => RunError::Usage(other.to_string()),
        }
    }
}

impl From<SpectraError> for RunError {
    fn from(e: SpectraError) -> Self {
        match e {
            SpectraError::Liouvillian(e) => e.into(),
            SpectraError::Linalg(e) => e.into(),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<DynamicsError> for RunError {
    fn from(e: DynamicsError) -> Self {
        match e {
            DynamicsError::Linalg(e) => e.into(),
            other => RunError::Usage(other.to_string()),
        }
    }
}

impl From<MeasuresError> for RunError {
    fn from(e: MeasuresError) -> Self {
        match e {
            MeasuresError::Shape { .. } => RunError::Usage(e.to_string()),
            MeasuresError::Linalg(e) => e.into(),
            other => RunError::Numerical(other.to_string()),
        }
    }
}

impl From<ScanError> for RunError {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::Dynamics(e) => e.into(),
            ScanError::Liouvillian(e) => e.into(),
            ScanError::Measures(e) => e.into(),
            ScanError::Linalg(e) => e.into(),
            other => RunError::Usage(other.to_string()),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub tol: Option<f64>,
}

#[derive(Debug)]
pub struct RunSummary {
    pub out_dir: PathBuf,
    pub files: Vec<FileRecord>,
    /// Human-readable lines for the terminal.
    pub report: Vec<String>,
    /// Numerical-quality problems found after the outputs were written.
    pub failures: Vec<String>,
}

impl RunSummary {
    pub fn exit_code(&self) -> i32 {
        if self.failures.is_empty() {
            0
        } else {
            2
        }
    }
}

fn output_dir(cfg: &RunConfig, ov: &Overrides) -> PathBuf {
    ov.out
        .clone()
        .or_else(|| cfg.output.directory.clone())
        .or_else(|| std::env::var_os(OUT_DIR_ENV).map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT_DIR))
}

/// Model used by `validate` when no configuration is given.
pub fn default_config() -> RunConfig {
    parse_config_str("[model]\nn_spins = 2\nbeta = 1.0\nalpha_override = 0.5\n").expect("built-in config is valid")
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    sink: OutputSink,
    report: Vec<String>,
    failures: Vec<String>,
    initial: Option<String>,
}

impl Ctx<'_> {
    fn m0(&self) -> f64 {
        equilibrium_magnetization(self.cfg.model.beta, self.cfg.model.omega0)
    }

    fn preset(&mut self, default: InitialState) -> InitialState {
        let p = self.cfg.initial.clone().unwrap_or(default);
        self.initial = Some(p.name());
        p
    }

    fn check_state(&mut self, label: &str, min_eig: f64, trace_defect: f64) {
        if min_eig < -STATE_QUALITY_TOL || trace_defect > STATE_QUALITY_TOL {
            self.failures.push(format!(
                "{label}: min eigenvalue {min_eig:e}, trace defect {trace_defect:e} (limit {STATE_QUALITY_TOL:e})"
            ));
        }
    }
}

fn pair_alpha(spec: &ModelSpec) -> Option<f64> {
    (spec.n_spins >= 2).then(|| alpha_of(spec, 0, 1))
}

fn require_spectrum_size(spec: &ModelSpec) -> Result<(), RunError> {
    if spec.n_spins > SPECTRUM_MAX_SPINS {
        return Err(RunError::Usage(format!(
            "dense spectral analysis is limited to {SPECTRUM_MAX_SPINS} spins, got {}",
            spec.n_spins
        )));
    }
    Ok(())
}

fn min_eigenvalue(rho: &DenseMatrix) -> Result<f64, RunError> {
    Ok(eigh(&rho.hermitian_part())?.values.into_iter().fold(f64::INFINITY, f64::min))
}

fn trace_defect(rho: &DenseMatrix) -> f64 {
    (rho.trace() - C64::new(1.0, 0.0)).norm()
}

fn configured_cloud(spec: &ModelSpec, label: f64, tol: ZeroTolerance) -> Result<Vec<CloudRow>, RunError> {
    let bundle = assemble_liouvillian(spec)?;
    let threshold = tol.threshold(bundle.superop.norm_one());
    let mut ev = eig_general(&bundle.dense_superop(), false)?.values;
    ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(a.im.total_cmp(&b.im)));
    Ok(ev
        .into_iter()
        .map(|z| CloudRow {
            alpha: label,
            re_lambda: z.re,
            im_lambda: z.im,
            is_zero_mode: z.norm() <= threshold,
        })
        .collect())
}

fn cmd_spectrum(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = &ctx.cfg.model;
    require_spectrum_size(spec)?;
    let tol = ctx.cfg.numeric.zero_tol;
    let (labels, rows): (Vec<Option<f64>>, Vec<CloudRow>) = match &ctx.cfg.numeric.alphas {
        Some(alphas) => (alphas.iter().map(|&a| Some(a)).collect(), spectrum_cloud(spec, alphas, tol)?),
        None => {
            let a = pair_alpha(spec);
            (vec![a], configured_cloud(spec, a.unwrap_or(f64::NAN), tol)?)
        }
    };
    let mut cloud = Table::new("spectrum", "spectrum/1", vec!["alpha", "re_lambda", "im_lambda", "is_zero_mode"]);
    let mut summary = Table::new(
        "spectrum_summary",
        "spectrum-summary/1",
        vec!["alpha", "zero_mode_count", "adr", "slowest_nonzero_decay"],
    );
    let per = rows.len() / labels.len();
    for (label, chunk) in labels.iter().zip(rows.chunks(per)) {
        let ev: Vec<C64> = chunk.iter().map(|r| C64::new(r.re_lambda, r.im_lambda)).collect();
        // the cluster threshold is already encoded in the flags
        let (_, adr, _) = decay_rates(&ev, 0.0);
        let count = chunk.iter().filter(|r| r.is_zero_mode).count();
        let slowest = chunk.iter().filter(|r| !r.is_zero_mode).map(|r| r.re_lambda.abs()).reduce(f64::min);
        let alpha_cell = Cell::from(*label);
        for r in chunk {
            cloud.push(vec![alpha_cell.clone(), r.re_lambda.into(), r.im_lambda.into(), r.is_zero_mode.into()]);
        }
        summary.push(vec![alpha_cell, count.into(), adr.into(), slowest.into()]);
        let shown = label.map_or("-".to_string(), |a| a.to_string());
        ctx.report.push(format!("alpha {shown}: {count} zero mode(s), ADR {adr:.6e}"));
    }
    ctx.sink.write_table(&cloud)?;
    ctx.sink.write_table(&summary)?;
    Ok(())
}

fn evolve_options(cfg: &RunConfig) -> EvolveOptions {
    let mut opts = EvolveOptions {
        max_step: cfg.numeric.max_step,
        ..EvolveOptions::default()
    };
    if let Some(tol) = cfg.numeric.krylov_tol {
        opts.krylov.tol = tol;
    }
    if let Some(m) = cfg.numeric.krylov_dim {
        opts.krylov.dim = m;
    }
    opts
}

/// Observables shared by trajectory and steady-state tables: the pair
/// Bloch values (or `⟨σz⟩` for one spin), concurrence, entropy, purity.
fn observable_cells(rho: &DenseMatrix, n: usize) -> Result<Vec<Cell>, RunError> {
    let (mz, mzz, mc) = if n >= 2 {
        let x = pair_bloch(rho, n, 0, 1)?;
        (Some(x.mz), Some(x.mzz), Some(x.mc))
    } else {
        let x = rho[(0, 0)].re - rho[(1, 1)].re;
        (Some(x), None, None)
    };
    let c = if n == 2 { Some(concurrence(rho)?) } else { None };
    Ok(vec![
        mz.into(),
        mzz.into(),
        mc.into(),
        c.into(),
        von_neumann_entropy(rho)?.into(),
        purity(rho).into(),
    ])
}

fn cmd_evolve(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = ctx.cfg.model.clone();
    let n = spec.n_spins;
    let preset = ctx.preset(InitialState::AllUp);
    let rho0 = preset.density(n, ctx.m0())?;
    let num = &ctx.cfg.numeric;
    let t_end = num.t_end / spec.r1;
    let times: Vec<f64> = (0..num.n_times).map(|k| t_end * k as f64 / (num.n_times - 1) as f64).collect();
    let bundle = assemble_liouvillian(&spec)?;
    let tr = evolve_full(&bundle, &rho0, &times, evolve_options(ctx.cfg))?;

    let mut table = Table::new(
        "trajectory",
        "trajectory/1",
        vec!["t", "mz", "mzz", "mc", "concurrence", "entropy", "purity", "trace_defect", "min_eig"],
    );
    let mut worst = (f64::INFINITY, 0.0f64);
    for (t, rho) in tr.times.iter().zip(&tr.states) {
        let me = min_eigenvalue(rho)?;
        let td = trace_defect(rho);
        worst = (worst.0.min(me), worst.1.max(td));
        let mut row = vec![Cell::from(*t)];
        row.extend(observable_cells(rho, n)?);
        row.extend([td.into(), me.into()]);
        table.push(row);
    }
    ctx.sink.write_table(&table)?;
    ctx.report.push(format!(
        "{} samples to t = {t_end} via {:?}; min eigenvalue {:.3e}, max trace defect {:.3e}",
        times.len(),
        tr.method,
        worst.0,
        worst.1
    ));
    ctx.check_state("trajectory", worst.0, worst.1);

    if n == 2 && spec.lamb_j0 == 0.0 && spec.lamb_k0 == 0.0 {
        let alpha = alpha_of(&spec, 0, 1);
        let x0 = bloch_from_density(&rho0)?;
        let red: Trajectory<BlochState> = evolve_bloch(&bundle.rates, alpha, x0, &times)?;
        let mut t2 = Table::new(
            "trajectory_reduced",
            "trajectory-reduced/1",
            vec!["t", "mz", "mzz", "mc", "max_abs_diff_full"],
        );
        let mut gap = 0.0f64;
        for ((t, x), rho) in red.times.iter().zip(&red.states).zip(&tr.states) {
            let diff = x.max_abs_diff(&bloch_from_density(rho)?);
            gap = gap.max(diff);
            t2.push(vec![(*t).into(), x.mz.into(), x.mzz.into(), x.mc.into(), diff.into()]);
        }
        ctx.sink.write_table(&t2)?;
        ctx.report.push(format!("reduced model agrees with full evolution to {gap:.3e}"));
    }
    Ok(())
}

const STEADY_COLUMNS: [&str; 9] = ["source", "mz", "mzz", "mc", "concurrence", "entropy", "purity", "trace_defect", "min_eig"];

fn steady_row(source: &str, rho: &DenseMatrix, n: usize) -> Result<Vec<Cell>, RunError> {
    let mut row = vec![Cell::from(source)];
    row.extend(observable_cells(rho, n)?);
    row.extend([trace_defect(rho).into(), min_eigenvalue(rho)?.into()]);
    Ok(row)
}

fn cmd_steady(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = ctx.cfg.model.clone();
    require_spectrum_size(&spec)?;
    let n = spec.n_spins;
    let bundle = assemble_liouvillian(&spec)?;
    let report = analyze(&bundle, ctx.cfg.numeric.zero_tol)?;
    let mut table = Table::new("steady", "steady/1", STEADY_COLUMNS.to_vec());
    for (k, rho) in report.steady_states.iter().enumerate() {
        table.push(steady_row(&format!("kernel:{k}"), rho, n)?);
    }

    let preset = ctx.preset(InitialState::AllUp);
    let rho0 = preset.density(n, ctx.m0())?;
    let settle = ctx.cfg.numeric.settle_time / spec.r1;
    let tr = evolve_full(&bundle, &rho0, &[settle], evolve_options(ctx.cfg))?;
    let evolved = &tr.states[0];
    table.push(steady_row("evolved", evolved, n)?);
    let (me, td) = (min_eigenvalue(evolved)?, trace_defect(evolved));
    ctx.check_state("evolved steady state", me, td);

    if n == 2 && spec.lamb_j0 == 0.0 && spec.lamb_k0 == 0.0 {
        let x = bloch_steady_state(&bundle.rates, alpha_of(&spec, 0, 1), bloch_from_density(&rho0)?);
        table.push(steady_row("reduced", &density_from_bloch(x), n)?);
    }
    ctx.sink.write_table(&table)?;
    ctx.report.push(format!(
        "{} zero mode(s), {} kernel state(s), ADR {:.6e}",
        report.zero_mode_count,
        report.steady_states.len(),
        report.adr
    ));
    Ok(())
}

fn sweep_table(name: &str, schema: &str, sweep: &SweepResult, with_derivative: bool) -> Table {
    let mut cols = vec!["x", "alpha", "m0", "mz", "mzz", "mc", "concurrence", "entropy", "purity"];
    if with_derivative {
        cols.extend(["dmz_dx", "dmzz_dx", "dmc_dx"]);
    }
    let mut t = Table::new(name, schema, cols);
    for r in &sweep.rows {
        let o = &r.observables;
        let b = o.bloch;
        let mut row = vec![
            r.x.into(),
            r.alpha.into(),
            r.m0.into(),
            b.map(|b| b.mz).into(),
            b.map(|b| b.mzz).into(),
            b.map(|b| b.mc).into(),
            o.concurrence.into(),
            o.entropy.into(),
            o.purity.into(),
        ];
        if with_derivative {
            row.extend((0..3).map(|c| Cell::from(r.derivative.map(|d| d[c]))));
        }
        t.push(row);
    }
    t
}

fn cmd_sweep_temperature(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = ctx.cfg.model.clone();
    let grid = ctx
        .cfg
        .numeric
        .temperatures
        .clone()
        .unwrap_or_else(|| geometric_temperatures(1.0, 12));
    // all-up or all-down sit on the Mc = 0 line at T = 0; the mixed state does not
    let preset = ctx.preset(InitialState::MaximallyMixed);
    if spec.n_spins != 2 {
        return Err(ScanError::NotAPair(spec.n_spins).into());
    }
    let x0 = bloch_from_density(&preset.density(2, ctx.m0())?)?;
    let sweep = temperature_sweep(&spec, &grid, x0, &preset.name())?;
    let mut table = sweep_table("sweep_temperature", "sweep-temperature/1", &sweep, true);
    table.columns[0] = "temperature";
    for (c, name) in ["dmz_dT", "dmzz_dT", "dmc_dT"].into_iter().enumerate() {
        table.columns[9 + c] = name;
    }
    ctx.sink.write_table(&table)?;
    if let Some(b) = sweep.boundary {
        let mut t = Table::new(
            "boundary",
            "boundary/1",
            vec!["t_min", "jump_mz", "jump_mzz", "jump_mc", "mc_slope"],
        );
        t.push(vec![b.t_min.into(), b.jump.mz.into(), b.jump.mzz.into(), b.jump.mc.into(), b.mc_slope.into()]);
        ctx.sink.write_table(&t)?;
        ctx.report.push(format!(
            "T = 0 jump from T = {:.3e}: dMz {:.6e}, dMzz {:.6e}, dMc {:.6e}",
            b.t_min, b.jump.mz, b.jump.mzz, b.jump.mc
        ));
    }
    Ok(())
}

fn cmd_entropy_scan(ctx: &mut Ctx) -> Result<(), RunError> {
    let spec = ctx.cfg.model.clone();
    let opts = EntropyScanOptions {
        alpha_low: ctx.cfg.numeric.alpha_low,
        preset: ctx.preset(InitialState::AllUp),
        settle_time: ctx.cfg.numeric.settle_time,
        evolve: evolve_options(ctx.cfg),
    };
    let sweep = entropy_vs_n(&spec, &ctx.cfg.numeric.n_values, &opts)?;
    let mut t = Table::new(
        "entropy",
        "entropy/1",
        vec!["n", "alpha", "m0", "entropy", "volume_law", "purity", "mz", "mzz", "mc"],
    );
    for r in &sweep.rows {
        let n = r.x as usize;
        let b = r.observables.bloch;
        t.push(vec![
            n.into(),
            r.alpha.into(),
            r.m0.into(),
            r.observables.entropy.into(),
            volume_law_entropy(n, r.m0).into(),
            r.observables.purity.into(),
            b.map(|b| b.mz).into(),
            b.map(|b| b.mzz).into(),
            b.map(|b| b.mc).into(),
        ]);
        if r.alpha == 1.0 {
            ctx.report.push(format!("n = {n}: S(alpha = 1) = {:.6}", r.observables.entropy));
        }
    }
    ctx.sink.write_table(&t)?;
    Ok(())
}

struct Check {
    name: &'static str,
    value: f64,
    limit: f64,
}

fn pair_spec(spec: &ModelSpec, alpha: f64) -> ModelSpec {
    ModelSpec {
        n_spins: 2,
        coupling: Coupling::AlphaOverride(alpha),
        lamb_j0: 0.0,
        lamb_k0: 0.0,
        ..spec.clone()
    }
}

fn validation_suite(spec: &ModelSpec, tol: ZeroTolerance, opts: EvolveOptions) -> Result<Vec<Check>, RunError> {
    let mut checks = Vec::new();
    let bundle = assemble_liouvillian(spec)?;
    let norm = bundle.superop.norm_one();
    checks.push(Check {
        name: "trace_preservation",
        value: bundle.trace_flow_defect() / norm.max(1.0),
        limit: 1e-12,
    });
    if spec.n_spins >= 2 {
        checks.push(Check {
            name: "pair_exchange_symmetry",
            value: check_weak_symmetry(&bundle).max_swap() / norm.max(1.0),
            limit: 1e-10,
        });
    }
    if spec.n_spins <= SPECTRUM_MAX_SPINS {
        let report = analyze(&bundle, tol)?;
        let worst = report
            .steady_states
            .iter()
            .map(min_eigenvalue)
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        checks.push(Check {
            name: "steady_state_positivity",
            value: (-worst).max(0.0),
            limit: STATE_QUALITY_TOL,
        });
    }

    let r1 = spec.r1;
    let m0 = equilibrium_magnetization(spec.beta, spec.omega0);
    let alpha = pair_alpha(spec).filter(|&a| a < 1.0 - 1e-6).unwrap_or(0.5);

    let common = assemble_liouvillian(&pair_spec(spec, 1.0))?;
    let s = singlet();
    checks.push(Check {
        name: "singlet_is_dark",
        value: common.apply(&s).norm_max() / common.superop.norm_one().max(1.0),
        limit: 1e-12,
    });

    let rates = rates_from_spec(&pair_spec(spec, alpha));
    let settle = 50.0 / r1;
    let far = evolve_bloch(&rates, alpha, BlochState::dark(), &[0.0, settle])?;
    checks.push(Check {
        name: "reduced_thermalizes",
        value: far.states[1].max_abs_diff(&BlochState::thermal(m0)),
        limit: 1e-8,
    });

    let rho0 = symmetrize_pair(&random_density(4, 7));
    let tr = evolve_full(&common, &rho0, &[settle], opts)?;
    let f = bloch_from_density(&rho0)?.conserved();
    checks.push(Check {
        name: "critical_fixed_point",
        value: bloch_from_density(&tr.states[0])?.max_abs_diff(&critical_steady_state(m0, f)),
        limit: 1e-6,
    });

    let partial = assemble_liouvillian(&pair_spec(spec, alpha))?;
    let times: Vec<f64> = (0..=20).map(|k| k as f64 * 0.5 / r1).collect();
    let full = evolve_full(&partial, &rho0, &times, opts)?;
    let red = evolve_bloch(&partial.rates, alpha, bloch_from_density(&rho0)?, &times)?;
    let mut gap = 0.0f64;
    for (rho, x) in full.states.iter().zip(&red.states) {
        gap = gap.max(bloch_from_density(rho)?.max_abs_diff(x));
    }
    checks.push(Check {
        name: "reduced_matches_full",
        value: gap,
        limit: 1e-6,
    });
    let trace = full.states.iter().map(trace_defect).fold(0.0, f64::max);
    let min_eig = full
        .states
        .iter()
        .map(min_eigenvalue)
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .fold(f64::INFINITY, f64::min);
    checks.push(Check {
        name: "trajectory_trace",
        value: trace,
        limit: STATE_QUALITY_TOL,
    });
    checks.push(Check {
        name: "trajectory_positivity",
        value: (-min_eig).max(0.0),
        limit: STATE_QUALITY_TOL,
    });
    Ok(checks)
}

fn cmd_validate(ctx: &mut Ctx) -> Result<(), RunError> {
    let checks = validation_suite(&ctx.cfg.model, ctx.cfg.numeric.zero_tol, evolve_options(ctx.cfg))?;
    let mut t = Table::new("validate", "validate/1", vec!["check", "value", "limit", "pass"]);
    for c in &checks {
        let pass = c.value <= c.limit;
        t.push(vec![c.name.into(), c.value.into(), c.limit.into(), pass.into()]);
        let verdict = if pass { "PASS" } else { "FAIL" };
        ctx.report.push(format!("{verdict} {} {:.3e} (limit {:.0e})", c.name, c.value, c.limit));
        if !pass {
            ctx.failures.push(format!("{} = {:e} exceeds {:e}", c.name, c.value, c.limit));
        }
    }
    ctx.sink.write_table(&t)?;
    Ok(())
}

fn tolerances_json(cfg: &RunConfig) -> serde_json::Value {
    json!({
        "zero_abs": cfg.numeric.zero_tol.abs,
        "zero_rel": cfg.numeric.zero_tol.rel,
        "state_quality": STATE_QUALITY_TOL,
        "krylov": evolve_options(cfg).krylov.tol,
    })
}

/// Runs one command and writes its tables plus `manifest.json`.
pub fn run(command: Command, config: Option<RunConfig>, overrides: &Overrides) -> Result<RunSummary, RunError> {
    let mut cfg = match (config, command) {
        (Some(c), _) => c,
        (None, Command::Validate) => default_config(),
        (None, _) => return Err(RunError::Usage(format!("`{command}` needs --config"))),
    };
    if let Some(tol) = overrides.tol {
        if !(tol > 0.0 && tol.is_finite()) {
            return Err(RunError::Usage(format!("--tol must be positive, got {tol}")));
        }
        cfg.numeric.zero_tol = ZeroTolerance::uniform(tol);
    }
    let started = Instant::now();
    let out_dir = output_dir(&cfg, overrides);
    let sink = OutputSink::create(&out_dir, cfg.output.format, cfg.output.precision)?;
    let mut ctx = Ctx {
        cfg: &cfg,
        sink,
        report: Vec::new(),
        failures: Vec::new(),
        initial: None,
    };
    match command {
        Command::Spectrum => cmd_spectrum(&mut ctx)?,
        Command::Evolve => cmd_evolve(&mut ctx)?,
        Command::Steady => cmd_steady(&mut ctx)?,
        Command::SweepTemperature => cmd_sweep_temperature(&mut ctx)?,
        Command::EntropyScan => cmd_entropy_scan(&mut ctx)?,
        Command::Validate => cmd_validate(&mut ctx)?,
    }
    let manifest = json!({
        "tool": "spinbath",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command.to_string(),
        "config": serde_json::to_value(&cfg.echo).unwrap_or(serde_json::Value::Null),
        "model": serde_json::to_value(&cfg.model).unwrap_or(serde_json::Value::Null),
        "initial_state": ctx.initial,
        "tolerances": tolerances_json(&cfg),
        "failures": ctx.failures,
        "wall_clock_seconds": started.elapsed().as_secs_f64(),
    });
    ctx.sink.write_manifest(manifest)?;
    Ok(RunSummary {
        out_dir,
        files: ctx.sink.files().to_vec(),
        report: ctx.report,
        failures: ctx.failures,
    })
}

fn load(path: Option<&Path>) -> Result<Option<RunConfig>, RunError> {
    path.map(parse_config).transpose().map_err(Into::into)
}

/// Parses arguments, runs, prints, and returns the process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    let overrides = Overrides {
        out: cli.out.clone(),
        tol: cli.tol,
    };
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: thread pool: {e}");
            return 1;
        }
    };
    let outcome = pool.install(|| load(cli.config.as_deref()).and_then(|cfg| run(cli.command, cfg, &overrides)));
    match outcome {
        Ok(summary) => {
            for line in &summary.report {
                println!("{line}");
            }
            for f in &summary.files {
                println!("wrote {}", summary.out_dir.join(&f.name).display());
            }
            for fail in &summary.failures {
                eprintln!("numerical quality: {fail}");
            }
            summary.exit_code()
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
