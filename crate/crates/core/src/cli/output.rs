//! Table and manifest writing.
//!
//! Floats are written in scientific notation with a fixed number of
//! significant digits, so re-reading a file gives back exactly the values that
//! were written. JSON output uses the same rounding.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Map, Value};
use sha2::{Digest, Sha256};

use super::config::OutputFormat;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Bool(bool),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Float)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Bool(x)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

impl From<String> for Cell {
    fn from(x: String) -> Self {
        Cell::Text(x)
    }
}

/// `x` with `digits` significant digits, e.g. `1.23450000000e-3`.
pub fn format_float(x: f64, digits: usize) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf".into() } else { "-inf".into() }
    } else {
        format!("{:.*e}", digits.saturating_sub(1), x)
    }
}

#[derive(Debug, Clone)]
pub struct Table {
    /// File stem, e.g. `trajectory`.
    pub name: String,
    /// Versioned column schema, e.g. `trajectory/1`.
    pub schema: String,
    pub columns: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, schema: &str, columns: Vec<&'static str>) -> Self {
        Self {
            name: name.into(),
            schema: schema.into(),
            columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width for {}", self.name);
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileRecord {
    pub name: String,
    pub schema: String,
    pub rows: usize,
    pub bytes: usize,
    pub sha256: String,
}

fn render_csv(table: &Table, digits: usize) -> Vec<u8> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(&table.columns).expect("in-memory write");
    for row in &table.rows {
        let fields: Vec<String> = row
            .iter()
            .map(|c| match c {
                Cell::Float(x) => format_float(*x, digits),
                Cell::Int(i) => i.to_string(),
                Cell::Bool(b) => b.to_string(),
                Cell::Text(s) => s.clone(),
                Cell::Empty => String::new(),
            })
            .collect();
        w.write_record(&fields).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

fn render_json(table: &Table, digits: usize) -> Vec<u8> {
    let rows: Vec<Value> = table
        .rows
        .iter()
        .map(|row| {
            let mut obj = Map::new();
            for (col, c) in table.columns.iter().zip(row) {
                let v = match c {
                    Cell::Float(x) if x.is_finite() => json!(format_float(*x, digits).parse::<f64>().unwrap()),
                    Cell::Float(x) => json!(format_float(*x, digits)),
                    Cell::Int(i) => json!(i),
                    Cell::Bool(b) => json!(b),
                    Cell::Text(s) => json!(s),
                    Cell::Empty => Value::Null,
                };
                obj.insert((*col).to_string(), v);
            }
            Value::Object(obj)
        })
        .collect();
    let doc = json!({ "schema": table.schema, "columns": table.columns, "rows": rows });
    let mut bytes = serde_json::to_vec_pretty(&doc).expect("serializable");
    bytes.push(b'\n');
    bytes
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Collects every file a run writes so the manifest can list them.
pub struct OutputSink {
    dir: PathBuf,
    format: OutputFormat,
    digits: usize,
    files: Vec<FileRecord>,
}

impl OutputSink {
    pub fn create(dir: &Path, format: OutputFormat, digits: usize) -> std::io::Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            format,
            digits,
            files: Vec::new(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write_table(&mut self, table: &Table) -> std::io::Result<PathBuf> {
        let (bytes, ext) = match self.format {
            OutputFormat::Csv => (render_csv(table, self.digits), "csv"),
            OutputFormat::Json => (render_json(table, self.digits), "json"),
        };
        let name = format!("{}.{ext}", table.name);
        let path = self.dir.join(&name);
        fs::write(&path, &bytes)?;
        self.files.push(FileRecord {
            name,
            schema: table.schema.clone(),
            rows: table.rows.len(),
            bytes: bytes.len(),
            sha256: sha256_hex(&bytes),
        });
        Ok(path)
    }

    pub fn files(&self) -> &[FileRecord] {
        &self.files
    }

    /// Writes `manifest.json` listing every file written so far.
    pub fn write_manifest(&self, mut manifest: Value) -> std::io::Result<PathBuf> {
        manifest["files"] = serde_json::to_value(&self.files).expect("serializable");
        let path = self.dir.join("manifest.json");
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
        bytes.push(b'\n');
        fs::write(&path, bytes)?;
        Ok(path)
    }
}
