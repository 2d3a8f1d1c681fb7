//! CSV tables with schemas and JSON summaries.

use std::path::Path;

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::data::DataReport;
use crate::error::HarnessError;

pub const CSV_FILE: &str = "results.csv";
pub const SCHEMA_FILE: &str = "results.schema.json";
pub const SUMMARY_FILE: &str = "summary.json";
pub const ERROR_FILE: &str = "error.json";

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Column {
    pub name: &'static str,
    pub description: &'static str,
}

pub const fn col(name: &'static str, description: &'static str) -> Column {
    Column { name, description }
}

/// A numeric time series or sweep table.
#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        assert_eq!(row.len(), self.columns.len(), "row width must match the schema");
        self.rows.push(row);
    }

    pub fn column(&self, name: &str) -> Option<Vec<f64>> {
        let k = self.columns.iter().position(|c| c.name == name)?;
        Some(self.rows.iter().map(|r| r[k]).collect())
    }

    pub fn schema(&self) -> Value {
        json!({ "file": CSV_FILE, "columns": self.columns })
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, HarnessError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let io = |e: csv::Error| HarnessError::Io(e.to_string());
        w.write_record(self.columns.iter().map(|c| c.name)).map_err(io)?;
        for r in &self.rows {
            w.write_record(r.iter().map(|x| format!("{x:?}"))).map_err(io)?;
        }
        w.into_inner().map_err(|e| HarnessError::Io(e.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum Comparison {
    #[serde(rename = "<")]
    Below,
    #[serde(rename = "<=")]
    AtMost,
    #[serde(rename = ">=")]
    AtLeast,
    /// Reported without a pass/fail threshold.
    #[serde(rename = "report")]
    Report,
}

/// One measurement tied to an acceptance criterion.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Measurement {
    /// `<criterion>/<quantity>`.
    pub name: String,
    /// Number of the acceptance criterion this measurement belongs to.
    pub criterion: u32,
    pub value: f64,
    pub threshold: Option<f64>,
    pub comparison: Comparison,
    pub pass: Option<bool>,
}

impl Measurement {
    pub fn check(name: &str, criterion: u32, value: f64, comparison: Comparison, threshold: f64) -> Self {
        let pass = match comparison {
            Comparison::Below => value < threshold,
            Comparison::AtMost => value <= threshold,
            Comparison::AtLeast => value >= threshold,
            Comparison::Report => true,
        };
        Self {
            name: name.into(),
            criterion,
            value,
            threshold: Some(threshold),
            comparison,
            pass: Some(pass && !value.is_nan()),
        }
    }

    pub fn flag(name: &str, criterion: u32, ok: bool) -> Self {
        Self {
            name: name.into(),
            criterion,
            value: if ok { 1.0 } else { 0.0 },
            threshold: Some(1.0),
            comparison: Comparison::AtLeast,
            pass: Some(ok),
        }
    }

    pub fn report(name: &str, criterion: u32, value: f64) -> Self {
        Self {
            name: name.into(),
            criterion,
            value,
            threshold: None,
            comparison: Comparison::Report,
            pass: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Summary {
    pub experiment: String,
    pub status: &'static str,
    /// Config without its output section, so that artifacts do not depend on paths.
    pub config: Value,
    pub data: DataReport,
    pub measurements: Vec<Measurement>,
}

impl Summary {
    pub fn new(cfg: &ExperimentConfig, data: DataReport, measurements: Vec<Measurement>) -> Self {
        let ok = measurements.iter().all(|m| m.pass != Some(false));
        Self {
            experiment: cfg.run.kind.map(|k| k.name().to_string()).unwrap_or_default(),
            status: if ok { "pass" } else { "fail" },
            config: config_record(cfg),
            data,
            measurements,
        }
    }

    pub fn passed(&self) -> bool {
        self.status == "pass"
    }

    pub fn measurement(&self, name: &str) -> Option<&Measurement> {
        self.measurements.iter().find(|m| m.name == name)
    }
}

fn config_record(cfg: &ExperimentConfig) -> Value {
    let mut v = serde_json::to_value(cfg).expect("config serializes");
    if let Some(m) = v.as_object_mut() {
        m.remove("output");
    }
    v
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), HarnessError> {
    std::fs::write(path, bytes).map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))
}

fn pretty(v: &impl Serialize) -> Result<Vec<u8>, HarnessError> {
    let mut out = serde_json::to_vec_pretty(v).map_err(|e| HarnessError::Io(e.to_string()))?;
    out.push(b'\n');
    Ok(out)
}

/// Writes the CSV, its schema and the summary into `dir`.
pub fn write_artifacts(dir: &Path, table: &Table, summary: &Summary) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    write(&dir.join(CSV_FILE), &table.to_csv()?)?;
    write(&dir.join(SCHEMA_FILE), &pretty(&table.schema())?)?;
    write(&dir.join(SUMMARY_FILE), &pretty(summary)?)
}

pub fn write_error(dir: &Path, e: &HarnessError) -> Result<(), HarnessError> {
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::Io(format!("{}: {e}", dir.display())))?;
    write(&dir.join(ERROR_FILE), &pretty(&e.record())?)
}
