//! Run records and the table and plot data they carry.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use sdlab_core::analysis::EstimateReport;
use sdlab_core::SolveReport;
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};

/// One table cell. Non-finite numbers are stored as [`Cell::Empty`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
    Empty,
}

impl Cell {
    pub fn num(x: f64) -> Self {
        if x.is_finite() {
            Cell::Num(x)
        } else {
            Cell::Empty
        }
    }

    pub fn opt(x: Option<f64>) -> Self {
        x.map_or(Cell::Empty, Cell::num)
    }

    pub fn int(x: usize) -> Self {
        Cell::Int(x as i64)
    }

    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn as_f64(&self) -> Option<f64> {
        match *self {
            Cell::Int(i) => Some(i as f64),
            Cell::Num(x) => Some(x),
            _ => None,
        }
    }

    /// CSV rendering: shortest round-trip decimal, empty string for missing.
    pub fn render(&self) -> String {
        match self {
            Cell::Int(i) => i.to_string(),
            Cell::Num(x) => format!("{x:?}"),
            Cell::Text(s) => s.clone(),
            Cell::Empty => String::new(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self { columns: columns.iter().map(|c| c.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.columns.len(), "row width does not match the header");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<&Cell>> {
        let i = self.columns.iter().position(|c| c == name)?;
        Some(self.rows.iter().map(|r| &r[i]).collect())
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Series {
    pub label: String,
    pub points: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Plot {
    pub title: String,
    pub x_label: String,
    pub y_label: String,
    pub log_x: bool,
    pub log_y: bool,
    pub series: Vec<Series>,
}

/// Measurements of one case (a solve, a field, a source) on one grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridRun {
    pub n_r: usize,
    pub n_theta: usize,
    pub h_r: f64,
    pub case: String,
    pub estimate: Option<EstimateReport>,
    pub solve: Option<SolveReport>,
    pub metrics: BTreeMap<String, f64>,
}

impl GridRun {
    pub fn new(grid: &sdlab_core::Grid, case: impl Into<String>) -> Self {
        Self {
            n_r: grid.n_r(),
            n_theta: grid.n_theta(),
            h_r: grid.h_r(),
            case: case.into(),
            estimate: None,
            solve: None,
            metrics: BTreeMap::new(),
        }
    }

    pub fn metric(&self, name: &str) -> Option<f64> {
        self.metrics.get(name).copied()
    }

    /// Records a metric; non-finite values are dropped so JSON stays lossless.
    pub fn set(&mut self, name: &str, value: f64) {
        if value.is_finite() {
            self.metrics.insert(name.to_string(), value);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub runs: Vec<GridRun>,
    pub summary: BTreeMap<String, f64>,
    pub table: Table,
    pub plot: Plot,
    /// Every Krylov solve and fixed-point loop reached its tolerance.
    pub converged: bool,
    pub wall_clock_ms: u64,
    pub artifacts: Vec<PathBuf>,
}

impl RunRecord {
    pub fn summary_value(&self, name: &str) -> Option<f64> {
        self.summary.get(name).copied()
    }

    pub fn runs_for<'a>(&'a self, case: &'a str) -> impl Iterator<Item = &'a GridRun> + 'a {
        self.runs.iter().filter(move |r| r.case == case)
    }

    /// Directory this record's artifacts are written to.
    pub fn output_dir(&self) -> PathBuf {
        self.config.output_dir.join(&self.config.name)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }
}
