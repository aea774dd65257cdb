//! Flat `key = value` run configuration files and the JSONL result records
//! written by the command-line tool.

use std::collections::BTreeMap;
use std::io::Write;

use serde::Serialize;
use serde_json::Value;

use crate::error::{CspError, Result};

/// Version of the [`ResultRecord`] layout.
pub const SCHEMA_VERSION: u32 = 1;

/// Parses a flat configuration file: one `key = value` pair per line, `#`
/// starts a comment, blank lines are ignored. Keys are normalised to
/// kebab-case; a repeated key is an error.
pub fn parse_config(text: &str) -> Result<Vec<(String, String)>> {
    let mut seen = BTreeMap::new();
    let mut pairs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| CspError::Parse(format!("config line {}: expected key = value", i + 1)))?;
        let key = key.trim().replace('_', "-");
        if key.is_empty() {
            return Err(CspError::Parse(format!("config line {}: empty key", i + 1)));
        }
        if seen.insert(key.clone(), i + 1).is_some() {
            return Err(CspError::Parse(format!("config line {}: duplicate key '{key}'", i + 1)));
        }
        pairs.push((key, value.trim().to_string()));
    }
    Ok(pairs)
}

/// Renders a config echo back into the flat file format. Arrays are
/// comma-joined, `null` entries are dropped.
pub fn render_config(echo: &BTreeMap<String, Value>) -> String {
    let mut out = String::new();
    for (key, value) in echo {
        let text = match value {
            Value::Null => continue,
            Value::String(s) => s.clone(),
            Value::Array(items) => items
                .iter()
                .map(|v| match v {
                    Value::String(s) => s.clone(),
                    other => other.to_string(),
                })
                .collect::<Vec<_>>()
                .join(","),
            other => other.to_string(),
        };
        out.push_str(&format!("{key} = {text}\n"));
    }
    out
}

/// One line of JSONL output.
#[derive(Clone, Debug, Serialize)]
pub struct ResultRecord<P: Serialize> {
    pub schema_version: u32,
    /// Seconds since the Unix epoch, present only when requested so that
    /// default output is byte-reproducible.
    pub timestamp: Option<u64>,
    pub subcommand: String,
    pub config: BTreeMap<String, Value>,
    pub payload: P,
}

impl<P: Serialize> ResultRecord<P> {
    pub fn new(subcommand: &str, config: BTreeMap<String, Value>, payload: P, stamp: bool) -> Self {
        let timestamp = stamp.then(|| {
            std::time::SystemTime::now().duration_since(std::time::UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
        });
        Self { schema_version: SCHEMA_VERSION, timestamp, subcommand: subcommand.to_string(), config, payload }
    }

    pub fn write_line(&self, out: &mut dyn Write) -> Result<()> {
        let line = serde_json::to_string(self).map_err(|e| CspError::Io(e.to_string()))?;
        writeln!(out, "{line}")?;
        Ok(())
    }
}

/// A numeric matrix with labelled rows and columns, written as CSV with a
/// header row `label_0,...,col_0,col_1,...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    pub row_labels: Vec<String>,
    pub columns: Vec<String>,
    pub rows: Vec<(Vec<String>, Vec<f64>)>,
}

impl Matrix {
    pub fn write_csv(&self, out: &mut dyn Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let io = |e: csv::Error| CspError::Io(e.to_string());
        w.write_record(self.row_labels.iter().chain(&self.columns)).map_err(io)?;
        for (labels, values) in &self.rows {
            let cells = labels.iter().cloned().chain(values.iter().map(|v| v.to_string()));
            w.write_record(cells).map_err(io)?;
        }
        w.flush()?;
        Ok(())
    }
}
