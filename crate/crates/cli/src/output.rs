//! CSV tables with a `#` header block, and JSON sidecars.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::config::{Derived, RawConfig};
use crate::error::CliError;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Empty,
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Num(x)
    }
}

impl From<Option<f64>> for Cell {
    fn from(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::Num)
    }
}

impl From<usize> for Cell {
    fn from(x: usize) -> Self {
        Cell::Int(x as u64)
    }
}

impl From<&str> for Cell {
    fn from(x: &str) -> Self {
        Cell::Text(x.to_string())
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn fmt_f64(x: f64) -> String {
    format!("{x:.16e}")
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Num(x) => fmt_f64(*x),
            Cell::Int(i) => i.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, Default)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<String>) -> Self {
        Table { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

/// Everything needed to document and re-run an output file.
#[derive(Debug, Clone)]
pub struct Report {
    pub subcommand: &'static str,
    pub config: RawConfig,
    pub derived: Option<Derived>,
    pub table: Table,
    /// Scalar results, echoed in the header block and the sidecar.
    pub summary: Vec<(String, Value)>,
    /// Structured results for the sidecar only.
    pub extra: Vec<(String, Value)>,
}

impl Report {
    pub fn new(subcommand: &'static str, config: RawConfig, derived: Option<Derived>, table: Table) -> Self {
        Report {
            subcommand,
            config,
            derived,
            table,
            summary: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn summary(&mut self, key: &str, value: impl Serialize) {
        self.summary.push((key.to_string(), to_value(value)));
    }

    pub fn extra(&mut self, key: &str, value: impl Serialize) {
        self.extra.push((key.to_string(), to_value(value)));
    }

    pub fn csv(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "# qcme {}", self.subcommand);
        let _ = writeln!(s, "# schema_version = {SCHEMA_VERSION}");
        let _ = writeln!(s, "# program_version = {}", env!("CARGO_PKG_VERSION"));
        s.push_str("# [config]\n");
        for line in self.config.to_toml().lines().filter(|l| !l.is_empty()) {
            let _ = writeln!(s, "#   {line}");
        }
        if let Some(d) = &self.derived {
            s.push_str("# [derived]\n");
            if let Value::Object(map) = to_value(d) {
                for (k, v) in map {
                    let _ = writeln!(s, "#   {k} = {}", render_value(&v));
                }
            }
        }
        if !self.summary.is_empty() {
            s.push_str("# [summary]\n");
            for (k, v) in &self.summary {
                let _ = writeln!(s, "#   {k} = {}", render_value(v));
            }
        }
        s.push_str(&self.table.columns.join(","));
        s.push('\n');
        for row in &self.table.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            s.push_str(&cells.join(","));
            s.push('\n');
        }
        s
    }

    pub fn sidecar(&self) -> String {
        let mut map = serde_json::Map::new();
        map.insert("schema_version".into(), SCHEMA_VERSION.into());
        map.insert("program_version".into(), env!("CARGO_PKG_VERSION").into());
        map.insert("subcommand".into(), self.subcommand.into());
        map.insert("config".into(), to_value(&self.config));
        map.insert("derived".into(), to_value(self.derived));
        map.insert("columns".into(), to_value(&self.table.columns));
        map.insert("rows".into(), self.table.rows.len().into());
        map.insert(
            "summary".into(),
            Value::Object(self.summary.iter().cloned().collect()),
        );
        for (k, v) in &self.extra {
            map.insert(k.clone(), v.clone());
        }
        let mut s = serde_json::to_string_pretty(&Value::Object(map)).expect("json serializes");
        s.push('\n');
        s
    }

    /// Writes the CSV to `out` (stdout when absent) and the sidecar next to it.
    pub fn write(&self, out: Option<&Path>) -> Result<(), CliError> {
        match out {
            None => {
                let mut stdout = std::io::stdout().lock();
                stdout.write_all(self.csv().as_bytes())?;
                stdout.flush()?;
            }
            Some(path) => {
                write_file(path, &self.csv())?;
                write_file(&sidecar_path(path), &self.sidecar())?;
            }
        }
        Ok(())
    }
}

pub fn sidecar_path(out: &Path) -> PathBuf {
    out.with_extension("json")
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn to_value(v: impl Serialize) -> Value {
    // non-finite floats become null, which is what JSON can express
    serde_json::to_value(v).unwrap_or(Value::Null)
}

fn render_value(v: &Value) -> String {
    match v {
        Value::Null => "none".into(),
        Value::Number(n) => match n.as_f64() {
            Some(x) if !n.is_u64() && !n.is_i64() => fmt_f64(x),
            _ => n.to_string(),
        },
        Value::String(s) => s.clone(),
        other => other.to_string(),
    }
}
