//! Run configuration: a TOML file with `[model]`, `[numeric]`, `[initial]` and
//! `[output]` tables. Parsing is strict and reports every problem at once.

use std::collections::BTreeSet;
use std::fmt;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;
use toml::{Table, Value};

use crate::dynamics::InitialState;
use crate::model::{Beta, Coupling, ModelError, ModelSpec};
use crate::spectra::ZeroTolerance;

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FieldError {
    /// Dotted path such as `model.alpha_override`.
    pub field: String,
    pub line: Option<usize>,
    pub message: String,
}

impl fmt::Display for FieldError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: `{}`: {}", self.field, self.message),
            None => write!(f, "`{}`: {}", self.field, self.message),
        }
    }
}

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("syntax error: {0}")]
    Syntax(String),
    #[error("{} invalid field(s):\n  {}", .0.len(), .0.iter().map(|e| e.to_string()).collect::<Vec<_>>().join("\n  "))]
    Invalid(Vec<FieldError>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OutputFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericConfig {
    pub zero_tol: ZeroTolerance,
    pub t_end: f64,
    pub n_times: usize,
    pub max_step: Option<f64>,
    /// Krylov residual tolerance for large systems; `None` keeps the default.
    pub krylov_tol: Option<f64>,
    /// Arnoldi basis size for large systems.
    pub krylov_dim: Option<usize>,
    /// Correlation grid for `spectrum`; absent means the model's own.
    pub alphas: Option<Vec<f64>>,
    /// Decreasing positive temperatures for `sweep-temperature`.
    pub temperatures: Option<Vec<f64>>,
    pub n_values: Vec<usize>,
    pub settle_time: f64,
    pub alpha_low: f64,
}

impl Default for NumericConfig {
    fn default() -> Self {
        Self {
            zero_tol: ZeroTolerance::default(),
            t_end: 20.0,
            n_times: 201,
            max_step: None,
            krylov_tol: None,
            krylov_dim: None,
            alphas: None,
            temperatures: None,
            n_values: (1..=6).collect(),
            settle_time: crate::scans::DEFAULT_SETTLE_TIME,
            alpha_low: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OutputConfig {
    pub directory: Option<PathBuf>,
    pub format: OutputFormat,
    /// Significant digits of every float written.
    pub precision: usize,
}

impl Default for OutputConfig {
    fn default() -> Self {
        Self {
            directory: None,
            format: OutputFormat::Csv,
            precision: 12,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub numeric: NumericConfig,
    pub initial: Option<InitialState>,
    pub output: OutputConfig,
    /// The parsed document, echoed into the manifest.
    pub echo: Value,
}

const TOP_KEYS: [&str; 4] = ["model", "numeric", "initial", "output"];

/// Line of `key = …` inside `[section]`, 1-based.
fn locate(source: &str, section: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    for (k, line) in source.lines().enumerate() {
        let t = line.trim();
        if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
            current = name.trim().to_string();
            continue;
        }
        if current == section {
            if let Some((lhs, _)) = t.split_once('=') {
                if lhs.trim() == key {
                    return Some(k + 1);
                }
            }
        }
    }
    None
}

/// Typed access to one table, remembering which keys were consumed.
struct Reader<'a> {
    table: Option<&'a Table>,
    section: &'static str,
    source: &'a str,
    used: BTreeSet<String>,
    errors: Vec<FieldError>,
}

impl<'a> Reader<'a> {
    fn new(table: Option<&'a Table>, section: &'static str, source: &'a str) -> Self {
        Self {
            table,
            section,
            source,
            used: BTreeSet::new(),
            errors: Vec::new(),
        }
    }

    fn error(&mut self, key: &str, message: impl Into<String>) {
        self.errors.push(FieldError {
            field: format!("{}.{key}", self.section),
            line: locate(self.source, self.section, key),
            message: message.into(),
        });
    }

    fn raw(&mut self, key: &str) -> Option<&'a Value> {
        self.used.insert(key.to_string());
        self.table.and_then(|t| t.get(key))
    }

    fn has(&self, key: &str) -> bool {
        self.table.is_some_and(|t| t.contains_key(key))
    }

    fn as_f64(v: &Value) -> Option<f64> {
        match v {
            Value::Float(x) => Some(*x),
            Value::Integer(i) => Some(*i as f64),
            _ => None,
        }
    }

    fn f64(&mut self, key: &str) -> Option<f64> {
        let v = self.raw(key)?;
        let x = Self::as_f64(v);
        if x.is_none() {
            self.error(key, format!("expected a number, got {}", v.type_str()));
        }
        x
    }

    fn usize(&mut self, key: &str) -> Option<usize> {
        let v = self.raw(key)?;
        match v {
            Value::Integer(i) if *i >= 0 => Some(*i as usize),
            _ => {
                self.error(key, format!("expected a non-negative integer, got {v}"));
                None
            }
        }
    }

    fn string(&mut self, key: &str) -> Option<&'a str> {
        let v = self.raw(key)?;
        let s = v.as_str();
        if s.is_none() {
            self.error(key, format!("expected a string, got {}", v.type_str()));
        }
        s
    }

    fn f64_list(&mut self, key: &str) -> Option<Vec<f64>> {
        let v = self.raw(key)?;
        let xs: Option<Vec<f64>> = v.as_array().and_then(|a| a.iter().map(Self::as_f64).collect());
        if xs.is_none() {
            self.error(key, "expected an array of numbers");
        }
        xs
    }

    fn usize_list(&mut self, key: &str) -> Option<Vec<usize>> {
        let v = self.raw(key)?;
        let xs: Option<Vec<usize>> = v.as_array().and_then(|a| {
            a.iter()
                .map(|x| x.as_integer().filter(|i| *i >= 0).map(|i| i as usize))
                .collect()
        });
        if xs.is_none() {
            self.error(key, "expected an array of non-negative integers");
        }
        xs
    }

    fn finish(mut self, sink: &mut Vec<FieldError>) {
        if let Some(t) = self.table {
            let unknown: Vec<String> = t.keys().filter(|k| !self.used.contains(*k)).cloned().collect();
            for k in unknown {
                self.error(&k, "unknown key");
            }
        }
        sink.append(&mut self.errors);
    }
}

fn section<'a>(doc: &'a Table, name: &str, errors: &mut Vec<FieldError>) -> Option<&'a Table> {
    match doc.get(name) {
        None => None,
        Some(Value::Table(t)) => Some(t),
        Some(other) => {
            errors.push(FieldError {
                field: name.into(),
                line: None,
                message: format!("expected a table, got {}", other.type_str()),
            });
            None
        }
    }
}

fn parse_model(r: &mut Reader) -> Option<ModelSpec> {
    let n_spins = r.usize("n_spins");
    if n_spins.is_none() && !r.has("n_spins") {
        r.error("n_spins", "required");
    }
    let omega0 = r.f64("omega0").unwrap_or(1.0);
    let r1 = r.f64("r1").unwrap_or(1.0);
    let bath_spacing = r.f64("bath_spacing").unwrap_or(1.0);
    let bath_hopping = r.f64("bath_hopping").unwrap_or(1.0);
    let lamb_j0 = r.f64("lamb_j0").unwrap_or(0.0);
    let lamb_k0 = r.f64("lamb_k0").unwrap_or(0.0);

    let beta = match (r.has("beta"), r.has("temperature")) {
        (true, true) => {
            r.raw("beta");
            r.raw("temperature");
            r.error("beta", "give exactly one of `beta` and `temperature`, not both");
            None
        }
        (false, false) => {
            r.error("beta", "one of `beta` (a number or \"inf\") and `temperature` is required");
            None
        }
        (true, false) => match r.raw("beta") {
            Some(Value::String(s)) if s == "inf" => Some(Beta::Infinite),
            Some(Value::Float(x)) if x.is_infinite() && *x > 0.0 => Some(Beta::Infinite),
            Some(v) => match Reader::as_f64(v) {
                Some(b) if b >= 0.0 && b.is_finite() => Some(Beta::Finite(b)),
                _ => {
                    r.error("beta", format!("expected a non-negative number or \"inf\", got {v}"));
                    None
                }
            },
            None => None,
        },
        (false, true) => match r.f64("temperature") {
            Some(t) if t >= 0.0 && t.is_finite() => Some(Beta::from_temperature(t)),
            Some(t) => {
                r.error("temperature", format!("must be finite and >= 0, got {t}"));
                None
            }
            None => None,
        },
    };

    let modes: Vec<&str> = ["alpha_override", "positions", "separation"]
        .into_iter()
        .filter(|k| r.has(k))
        .collect();
    let coupling = match modes.as_slice() {
        [] => {
            r.error("alpha_override", "one of `alpha_override`, `positions` or `separation` is required");
            None
        }
        [single] => match *single {
            "alpha_override" => r.f64("alpha_override").map(Coupling::AlphaOverride),
            "positions" => r.f64_list("positions").map(Coupling::Positions),
            _ => r.f64("separation").map(Coupling::UniformSeparation),
        },
        many => {
            for k in many {
                r.raw(k);
            }
            r.error(
                many[1],
                format!("geometry and alpha_override are mutually exclusive; found {}", many.join(", ")),
            );
            None
        }
    };

    let spec = ModelSpec {
        n_spins: n_spins?,
        omega0,
        beta: beta?,
        bath_spacing,
        bath_hopping,
        r1,
        coupling: coupling?,
        lamb_j0,
        lamb_k0,
    };
    if let Err(errs) = spec.validate() {
        for e in errs {
            match e {
                ModelError::Invalid { field, reason } => {
                    let key = if field == "uniform_separation" { "separation" } else { field };
                    r.error(key, reason);
                }
                ModelError::Capacity { n, max } => r.error("n_spins", format!("{n} spins exceed the maximum of {max}")),
            }
        }
        return None;
    }
    Some(spec)
}

fn parse_numeric(r: &mut Reader) -> NumericConfig {
    let d = NumericConfig::default();
    let mut tol = d.zero_tol;
    if let Some(t) = r.f64("zero_tol_abs") {
        tol.abs = t;
    }
    if let Some(t) = r.f64("zero_tol_rel") {
        tol.rel = t;
    }
    if !(tol.abs >= 0.0 && tol.rel >= 0.0) {
        r.error("zero_tol_abs", "tolerances must be >= 0");
    }
    let t_end = r.f64("t_end").unwrap_or(d.t_end);
    if !(t_end > 0.0 && t_end.is_finite()) {
        r.error("t_end", format!("must be positive, got {t_end}"));
    }
    let n_times = r.usize("n_times").unwrap_or(d.n_times);
    if n_times < 2 {
        r.error("n_times", "need at least 2 samples");
    }
    let max_step = r.f64("max_step");
    if max_step.is_some_and(|h| !(h > 0.0)) {
        r.error("max_step", "must be positive");
    }
    let krylov_tol = r.f64("krylov_tol");
    if krylov_tol.is_some_and(|t| !(t > 0.0 && t < 1.0)) {
        r.error("krylov_tol", "must lie in (0, 1)");
    }
    let krylov_dim = r.usize("krylov_dim");
    if krylov_dim.is_some_and(|m| m < 2) {
        r.error("krylov_dim", "need at least 2");
    }
    let alphas = r.f64_list("alphas");
    if let Some(a) = &alphas {
        if a.is_empty() || a.iter().any(|x| !(0.0..=1.0).contains(x)) {
            r.error("alphas", "need a non-empty list of values in [0, 1]");
        }
    }
    let temperatures = r.f64_list("temperatures");
    if let Some(t) = &temperatures {
        if t.is_empty() || t.iter().any(|x| !(*x > 0.0 && x.is_finite())) || t.windows(2).any(|w| w[1] >= w[0]) {
            r.error("temperatures", "need strictly decreasing positive values; T = 0 is always added");
        }
    }
    let n_values = r.usize_list("n_values").unwrap_or(d.n_values);
    let settle_time = r.f64("settle_time").unwrap_or(d.settle_time);
    if !(settle_time > 0.0 && settle_time.is_finite()) {
        r.error("settle_time", "must be positive");
    }
    let alpha_low = r.f64("alpha_low").unwrap_or(d.alpha_low);
    if !(0.0..1.0).contains(&alpha_low) {
        r.error("alpha_low", format!("must lie in [0, 1), got {alpha_low}"));
    }
    NumericConfig {
        zero_tol: tol,
        t_end,
        n_times,
        max_step,
        krylov_tol,
        krylov_dim,
        alphas,
        temperatures,
        n_values,
        settle_time,
        alpha_low,
    }
}

fn parse_initial(r: &mut Reader) -> Option<InitialState> {
    r.table?;
    let preset = r.string("preset");
    let seed = r.usize("seed").map(|s| s as u64);
    let bloch = r.raw("bloch").map(|v| {
        v.as_array().and_then(|a| {
            a.iter()
                .map(|row| {
                    let xs: Option<Vec<f64>> = row.as_array()?.iter().map(Reader::as_f64).collect();
                    xs.filter(|x| x.len() == 3).map(|x| [x[0], x[1], x[2]])
                })
                .collect::<Option<Vec<_>>>()
        })
    });
    let state = match preset {
        Some("all-up") => Some(InitialState::AllUp),
        Some("all-down") => Some(InitialState::AllDown),
        Some("singlet-pairs") => Some(InitialState::SingletPairs),
        Some("maximally-mixed") => Some(InitialState::MaximallyMixed),
        Some("thermal") => Some(InitialState::Thermal),
        Some("random") => Some(InitialState::Random { seed: seed.unwrap_or(0) }),
        Some("random-symmetric") => Some(InitialState::RandomSymmetric { seed: seed.unwrap_or(0) }),
        Some("product") => match bloch.clone() {
            Some(Some(b)) => Some(InitialState::Product { bloch: b }),
            _ => {
                r.error("bloch", "preset \"product\" needs `bloch = [[x, y, z], ...]`");
                None
            }
        },
        Some(other) => {
            r.error("preset", format!("unknown preset \"{other}\""));
            None
        }
        None => {
            r.error("preset", "required inside [initial]");
            None
        }
    };
    if bloch.is_some() && preset != Some("product") {
        r.error("bloch", "only used with preset \"product\"");
    }
    state
}

fn parse_output(r: &mut Reader) -> OutputConfig {
    let d = OutputConfig::default();
    let directory = r.string("directory").map(PathBuf::from);
    let format = match r.string("format") {
        None | Some("csv") => OutputFormat::Csv,
        Some("json") => OutputFormat::Json,
        Some(other) => {
            r.error("format", format!("expected \"csv\" or \"json\", got \"{other}\""));
            d.format
        }
    };
    let precision = r.usize("precision").unwrap_or(d.precision);
    if !(1..=17).contains(&precision) {
        r.error("precision", format!("significant digits must lie in 1..=17, got {precision}"));
    }
    OutputConfig {
        directory,
        format,
        precision,
    }
}

/// Parses and validates a configuration document.
pub fn parse_config_str(source: &str) -> Result<RunConfig, ConfigError> {
    let doc: Table = source.parse().map_err(|e: toml::de::Error| ConfigError::Syntax(e.to_string()))?;
    let mut errors = Vec::new();
    for key in doc.keys().filter(|k| !TOP_KEYS.contains(&k.as_str())) {
        errors.push(FieldError {
            field: key.clone(),
            line: source.lines().position(|l| {
                let t = l.trim();
                t == format!("[{key}]") || t.split_once('=').is_some_and(|(lhs, _)| lhs.trim() == key)
            }).map(|k| k + 1),
            message: "unknown key".into(),
        });
    }
    let tables: Vec<Option<&Table>> = TOP_KEYS.iter().map(|k| section(&doc, k, &mut errors)).collect();
    if tables[0].is_none() && !doc.contains_key("model") {
        errors.push(FieldError {
            field: "model".into(),
            line: None,
            message: "required table missing".into(),
        });
    }

    let mut r = Reader::new(tables[0], "model", source);
    let model = if tables[0].is_some() { parse_model(&mut r) } else { None };
    r.finish(&mut errors);
    let mut r = Reader::new(tables[1], "numeric", source);
    let numeric = parse_numeric(&mut r);
    r.finish(&mut errors);
    let mut r = Reader::new(tables[2], "initial", source);
    let initial = parse_initial(&mut r);
    r.finish(&mut errors);
    let mut r = Reader::new(tables[3], "output", source);
    let output = parse_output(&mut r);
    r.finish(&mut errors);

    match model {
        Some(model) if errors.is_empty() => Ok(RunConfig {
            model,
            numeric,
            initial,
            output,
            echo: Value::Table(doc),
        }),
        _ => Err(ConfigError::Invalid(errors)),
    }
}

pub fn parse_config(path: &Path) -> Result<RunConfig, ConfigError> {
    let source = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_config_str(&source)
}
