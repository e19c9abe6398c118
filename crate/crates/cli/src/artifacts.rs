//! Artifact files: versioned CSV tables and the JSON run summary.
//!
//! Every CSV starts with a `# ntklab-csv v1 artifact=<name>` line followed by
//! the column-name header row. Floats are written with Rust's shortest
//! round-trip formatting, so re-running a config byte-reproduces each file.

use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;

pub const CSV_VERSION: &str = "ntklab-csv v1";

pub struct CsvWriter {
    out: BufWriter<std::fs::File>,
    path: PathBuf,
    columns: usize,
}

impl CsvWriter {
    pub fn create(path: &Path, artifact: &str, columns: &[&str]) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)
                .with_context(|| format!("creating {}", parent.display()))?;
        }
        let file =
            std::fs::File::create(path).with_context(|| format!("creating {}", path.display()))?;
        let mut out = BufWriter::new(file);
        writeln!(out, "# {CSV_VERSION} artifact={artifact}")?;
        writeln!(out, "{}", columns.join(","))?;
        Ok(CsvWriter {
            out,
            path: path.to_path_buf(),
            columns: columns.len(),
        })
    }

    pub fn row(&mut self, values: &[CsvValue]) -> Result<()> {
        debug_assert_eq!(values.len(), self.columns, "{}", self.path.display());
        let mut first = true;
        for v in values {
            if !first {
                write!(self.out, ",")?;
            }
            first = false;
            match v {
                CsvValue::Int(i) => write!(self.out, "{i}")?,
                CsvValue::Float(f) => write!(self.out, "{f}")?,
                CsvValue::Text(s) => write!(self.out, "{s}")?,
                CsvValue::Missing => {}
            }
        }
        writeln!(self.out)?;
        Ok(())
    }

    pub fn finish(mut self) -> Result<PathBuf> {
        self.out.flush()?;
        Ok(self.path)
    }
}

pub enum CsvValue {
    Int(i64),
    Float(f64),
    Text(String),
    Missing,
}

impl From<f64> for CsvValue {
    fn from(v: f64) -> Self {
        CsvValue::Float(v)
    }
}

impl From<usize> for CsvValue {
    fn from(v: usize) -> Self {
        CsvValue::Int(v as i64)
    }
}

pub fn write_json_summary<T: Serialize>(path: &Path, summary: &T) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent)?;
    }
    let text = serde_json::to_string_pretty(summary)?;
    std::fs::write(path, text + "\n").with_context(|| format!("writing {}", path.display()))
}

/// Fitted-vs-predicted pairing emitted for every quantity in the summary.
#[derive(Debug, Clone, Serialize)]
pub struct Comparison {
    pub fitted: f64,
    pub predicted: Option<f64>,
    /// |fitted - predicted| / |predicted|.
    pub relative_deviation: Option<f64>,
}

impl Comparison {
    pub fn new(fitted: f64, predicted: Option<f64>) -> Self {
        let relative_deviation = predicted
            .filter(|p| *p != 0.0)
            .map(|p| ((fitted - p) / p).abs());
        Comparison {
            fitted,
            predicted,
            relative_deviation,
        }
    }
}
