//! Deterministic report emission.
//!
//! A run produces a JSON report (tool version, resolved config, seed, guard
//! settings, summary and data tables) and one CSV file per table. Wall-clock
//! time and the worker count go to a separate `.timing.json` sidecar so that
//! the report itself depends only on the configuration.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};
use treedyn::CostGuards;

use crate::config::{ExperimentConfig, Format};
use crate::error::CliError;

pub const TOOL: &str = "treedyn";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// A CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(i64),
    Text(String),
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(x: u64) -> Self {
        Cell::Int(x as i64)
    }
}

impl From<u32> for Cell {
    fn from(x: u32) -> Self {
        Cell::Int(i64::from(x))
    }
}

impl From<i32> for Cell {
    fn from(x: i32) -> Self {
        Cell::Int(i64::from(x))
    }
}

impl From<bool> for Cell {
    fn from(x: bool) -> Self {
        Cell::Text(x.to_string())
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

impl Cell {
    fn csv(&self) -> String {
        match self {
            // Debug formatting is the shortest string that parses back to
            // the same float.
            Cell::Float(x) => format!("{x:?}"),
            Cell::Int(x) => x.to_string(),
            Cell::Text(s) if s.contains([',', '"', '\n']) => format!("\"{}\"", s.replace('"', "\"\"")),
            Cell::Text(s) => s.clone(),
        }
    }

    fn json(&self) -> Value {
        match self {
            Cell::Float(x) => json!(x),
            Cell::Int(x) => json!(x),
            Cell::Text(s) => json!(s),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: impl Into<String>, columns: &[&str]) -> Self {
        Self {
            name: name.into(),
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    /// CSV with a header line and LF line endings.
    pub fn to_csv(&self) -> String {
        let mut out = self.columns.join(",");
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::csv).collect();
            let _ = writeln!(out, "{}", cells.join(","));
        }
        out
    }

    fn to_json(&self) -> Value {
        json!({
            "columns": self.columns,
            "rows": self
                .rows
                .iter()
                .map(|r| r.iter().map(Cell::json).collect::<Vec<_>>())
                .collect::<Vec<_>>(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Report {
    /// File stem, e.g. `simulate-coalescing`.
    pub name: String,
    pub config: ExperimentConfig,
    pub guards: CostGuards,
    pub summary: Value,
    pub tables: Vec<Table>,
}

/// Timing details kept out of the deterministic report.
#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub wall_clock_seconds: f64,
    pub workers: usize,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub checks: Vec<(String, f64)>,
}

pub fn guards_json(g: &CostGuards) -> Value {
    json!({
        "coalescing_max_depth": g.coalescing_max_depth,
        "voter_max_depth": g.voter_max_depth,
        "max_visits_per_sample": g.max_visits_per_sample,
        "lattice_max_sites": g.lattice_max_sites,
        "ising_max_vertices": g.ising_max_vertices,
        "max_horizon": g.max_horizon,
    })
}

impl Report {
    pub fn to_json(&self) -> Value {
        let tables: serde_json::Map<String, Value> = self
            .tables
            .iter()
            .map(|t| (t.name.clone(), t.to_json()))
            .collect();
        json!({
            "tool": TOOL,
            "version": VERSION,
            "command": self.config.command,
            "seed": self.config.sampling.seed,
            "config": self.config,
            "guards": guards_json(&self.guards),
            "summary": self.summary,
            "tables": tables,
        })
    }

    pub fn json_text(&self) -> String {
        let mut s = serde_json::to_string_pretty(&self.to_json()).expect("report is valid JSON");
        s.push('\n');
        s
    }

    /// CSV of every table; several tables are separated by `# name` lines.
    pub fn csv_text(&self) -> String {
        if let [only] = &self.tables[..] {
            return only.to_csv();
        }
        let mut out = String::new();
        for t in &self.tables {
            let _ = writeln!(out, "# {}", t.name);
            out.push_str(&t.to_csv());
        }
        out
    }

    /// Writes `<name>.json`, one `<table>.csv` per table and
    /// `<name>.timing.json` into `dir`; returns the paths written.
    pub fn write(&self, dir: &Path, timing: &Timing) -> Result<Vec<PathBuf>, CliError> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::new();
        let path = dir.join(format!("{}.json", self.name));
        std::fs::write(&path, self.json_text())?;
        written.push(path);
        for t in &self.tables {
            let path = dir.join(format!("{}.csv", t.name));
            std::fs::write(&path, t.to_csv())?;
            written.push(path);
        }
        let path = dir.join(format!("{}.timing.json", self.name));
        let mut text = serde_json::to_string_pretty(timing).expect("timing is valid JSON");
        text.push('\n');
        std::fs::write(&path, text)?;
        written.push(path);
        Ok(written)
    }

    pub fn stdout_text(&self, format: Format) -> String {
        match format {
            Format::Csv => self.csv_text(),
            Format::Json => self.json_text(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Report {
        let mut t = Table::new("demo", &["T", "value", "label"]);
        t.push(vec![0.1.into(), 1e-40.into(), "a,b".into()]);
        t.push(vec![2.0.into(), 3u64.into(), "plain".into()]);
        Report {
            name: "demo".into(),
            config: ExperimentConfig::default(),
            guards: CostGuards::default(),
            summary: json!({"x": 1.5}),
            tables: vec![t],
        }
    }

    #[test]
    fn csv_uses_round_trip_floats_and_lf() {
        let csv = sample().csv_text();
        assert_eq!(csv, "T,value,label\n0.1,1e-40,\"a,b\"\n2.0,3,plain\n");
        for line in csv.lines().skip(1) {
            let v: f64 = line.split(',').next().unwrap().parse().unwrap();
            assert!(v == 0.1 || v == 2.0);
        }
    }

    #[test]
    fn report_writes_deterministic_files() {
        let dir = tempfile::tempdir().unwrap();
        let r = sample();
        let timing = Timing {
            wall_clock_seconds: 0.5,
            workers: 2,
            checks: vec![],
        };
        let a = r.write(&dir.path().join("a"), &timing).unwrap();
        let b = r.write(&dir.path().join("b"), &Timing { wall_clock_seconds: 9.0, ..timing }).unwrap();
        assert_eq!(a.len(), 3);
        for (x, y) in a.iter().zip(&b).take(2) {
            assert_eq!(std::fs::read(x).unwrap(), std::fs::read(y).unwrap());
        }
        let json: Value = serde_json::from_str(&r.json_text()).unwrap();
        assert_eq!(json["version"], VERSION);
        assert_eq!(json["guards"]["voter_max_depth"], 14);
    }
}
