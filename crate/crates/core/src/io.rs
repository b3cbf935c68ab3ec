//! Sample CSV files and run manifests.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::SampleSet;

/// Parses one point per line, comma separated. A first line whose first
/// token is not a number is taken as a header; lines starting with `#` and
/// blank lines are skipped.
pub fn parse_sample_csv(text: &str) -> Result<(SampleSet, Option<Vec<String>>)> {
    let mut header: Option<Vec<String>> = None;
    let mut dim = None;
    let mut points = Vec::new();
    let mut first = true;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if first {
            first = false;
            if fields[0].parse::<f64>().is_err() {
                header = Some(fields.iter().map(|s| s.to_string()).collect());
                continue;
            }
        }
        match dim {
            None => dim = Some(fields.len()),
            Some(d) if d != fields.len() => {
                return Err(Error::Parse(format!("line {}: expected {d} columns, found {}", lineno + 1, fields.len())))
            }
            _ => {}
        }
        for f in fields {
            let v: f64 = f.parse().map_err(|_| Error::Parse(format!("line {}: '{f}' is not a number", lineno + 1)))?;
            points.push(v);
        }
    }
    let dim = dim.ok_or(Error::EmptyInput("sample CSV has no data rows"))?;
    if let Some(h) = &header {
        if h.len() != dim {
            return Err(Error::Parse(format!("header has {} columns but rows have {dim}", h.len())));
        }
    }
    Ok((SampleSet::new(points, dim)?, header))
}

pub fn read_sample_csv(path: &Path) -> Result<SampleSet> {
    let text = fs::read_to_string(path)?;
    parse_sample_csv(&text).map(|(s, _)| s)
}

/// Formats with 17 significant digits, enough to round-trip any `f64`.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn sample_to_csv(sample: &SampleSet, header: Option<&[String]>) -> String {
    let mut out = String::new();
    if let Some(h) = header {
        out.push_str(&h.join(","));
        out.push('\n');
    }
    for row in sample.rows() {
        let cells: Vec<String> = row.iter().map(|&v| format_f64(v)).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write_sample_csv(path: &Path, sample: &SampleSet, header: Option<&[String]>) -> Result<()> {
    let mut f = fs::File::create(path)?;
    f.write_all(sample_to_csv(sample, header).as_bytes())?;
    Ok(())
}

/// Provenance attached to every output: enough to re-run the command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config: serde_json::Value,
    pub seed: u64,
    pub version: String,
    /// Wall-clock seconds per phase; only recorded on request so that
    /// repeated runs produce identical files.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub timings: Vec<(String, f64)>,
}

impl RunManifest {
    pub fn new(command: &str, args: Vec<String>, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            args,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timings: Vec::new(),
        }
    }
}

/// `{"manifest": ..., "result": ...}` as pretty JSON.
pub fn result_json<T: Serialize>(manifest: &RunManifest, result: &T) -> Result<String> {
    let v = serde_json::json!({ "manifest": manifest, "result": result });
    Ok(serde_json::to_string_pretty(&v)? + "\n")
}

/// A CSV table preceded by a `#` line holding the manifest.
pub fn table_csv(manifest: &RunManifest, header: &[&str], rows: &[Vec<String>]) -> Result<String> {
    let mut out = format!("# {}\n", serde_json::to_string(manifest)?);
    out.push_str(&header.join(","));
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    Ok(out)
}
