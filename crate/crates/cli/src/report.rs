//! Reports: rows of computed-versus-oracle values plus pass/fail criteria.

use std::io::Write;
use std::path::Path;

use dysonprop::json::{fmt_f64, to_string};
use dysonprop::C64;
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Int(i64),
    Real(f64),
    Text(String),
}

impl Value {
    /// Text form used in CSV cells.
    pub fn render(&self) -> String {
        match self {
            Value::Int(i) => i.to_string(),
            Value::Real(x) => fmt_f64(*x),
            Value::Text(s) => s.clone(),
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<usize> for Value {
    fn from(v: usize) -> Self {
        Value::Int(v as i64)
    }
}

impl From<u64> for Value {
    fn from(v: u64) -> Self {
        Value::Int(v as i64)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Real(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Text(v.to_owned())
    }
}

impl From<String> for Value {
    fn from(v: String) -> Self {
        Value::Text(v)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entry {
    pub key: String,
    pub value: Value,
}

pub fn entry(key: &str, value: impl Into<Value>) -> Entry {
    Entry { key: key.to_owned(), value: value.into() }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Row {
    pub inputs: Vec<Entry>,
    pub computed: C64,
    pub oracle: C64,
    pub abs_error: f64,
    pub rel_error: f64,
}

fn abs_error(computed: C64, oracle: C64) -> f64 {
    (computed - oracle).norm()
}

impl Row {
    pub fn new(inputs: Vec<Entry>, computed: C64, oracle: C64) -> Self {
        let abs = abs_error(computed, oracle);
        let scale = oracle.norm();
        let rel_error = if scale == 0.0 { abs } else { abs / scale };
        Self { inputs, computed, oracle, abs_error: abs, rel_error }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "rule", rename_all = "kebab-case")]
pub enum Rule {
    /// `measured <= threshold`.
    AtMost,
    /// `measured >= threshold`.
    AtLeast,
    /// `|measured / target - 1| <= threshold`.
    RatioWithin { target: f64 },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Criterion {
    pub name: String,
    #[serde(flatten)]
    pub rule: Rule,
    pub measured: f64,
    pub threshold: f64,
    pub passed: bool,
}

impl Criterion {
    pub fn new(name: impl Into<String>, rule: Rule, measured: f64, threshold: f64) -> Self {
        let passed = match rule {
            Rule::AtMost => measured <= threshold,
            Rule::AtLeast => measured >= threshold,
            Rule::RatioWithin { target } => (measured / target - 1.0).abs() <= threshold,
        };
        Self { name: name.into(), rule, measured, threshold, passed }
    }

    pub fn at_most(name: impl Into<String>, measured: f64, threshold: f64) -> Self {
        Self::new(name, Rule::AtMost, measured, threshold)
    }

    /// One line for terminals: `PASS name: measured (rule threshold)`.
    pub fn describe(&self) -> String {
        let verdict = if self.passed { "PASS" } else { "FAIL" };
        let rule = match self.rule {
            Rule::AtMost => format!("<= {:e}", self.threshold),
            Rule::AtLeast => format!(">= {:e}", self.threshold),
            Rule::RatioWithin { target } => format!("within {} of {target}", self.threshold),
        };
        format!("{verdict} {}: {:e} ({rule})", self.name, self.measured)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub command: String,
    pub params: Vec<Entry>,
    pub input_keys: Vec<String>,
    pub rows: Vec<Row>,
    pub summary: Vec<Criterion>,
}

impl Report {
    pub fn new(command: &str, input_keys: &[&str]) -> Self {
        Self {
            command: command.to_owned(),
            params: Vec::new(),
            input_keys: input_keys.iter().map(|k| (*k).to_owned()).collect(),
            rows: Vec::new(),
            summary: Vec::new(),
        }
    }

    pub fn param(&mut self, key: &str, value: impl Into<Value>) {
        self.params.push(entry(key, value));
    }

    pub fn push_row(&mut self, values: Vec<Value>, computed: C64, oracle: C64) {
        assert_eq!(values.len(), self.input_keys.len(), "row inputs must match the report keys");
        let inputs = self.input_keys.iter().zip(values).map(|(k, v)| Entry { key: k.clone(), value: v }).collect();
        self.rows.push(Row::new(inputs, computed, oracle));
    }

    pub fn criterion(&mut self, c: Criterion) {
        self.summary.push(c);
    }

    pub fn passed(&self) -> bool {
        self.summary.iter().all(|c| c.passed)
    }

    /// Largest `abs_error` over rows whose input `key` renders as `value`.
    pub fn max_error_where(&self, key: &str, value: &str) -> f64 {
        self.rows
            .iter()
            .filter(|r| r.inputs.iter().any(|e| e.key == key && e.value.render() == value))
            .map(|r| r.abs_error)
            .fold(0.0, f64::max)
    }

    fn validate(&self) -> Result<(), CliError> {
        for (i, row) in self.rows.iter().enumerate() {
            let keys: Vec<&str> = row.inputs.iter().map(|e| e.key.as_str()).collect();
            if keys != self.input_keys.iter().map(String::as_str).collect::<Vec<_>>() {
                return Err(CliError::Report(format!("row {i} has input keys {keys:?}")));
            }
            let recomputed = abs_error(row.computed, row.oracle);
            if recomputed.to_bits() != row.abs_error.to_bits() {
                return Err(CliError::Report(format!(
                    "row {i}: stored abs_error {} differs from recomputed {}",
                    row.abs_error, recomputed
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Json,
}

pub const VALUE_COLUMNS: [&str; 6] = ["computed_re", "computed_im", "oracle_re", "oracle_im", "abs_error", "rel_error"];

pub fn render(report: &Report, format: Format) -> Result<String, CliError> {
    report.validate()?;
    match format {
        Format::Json => {
            let mut s = to_string(report)?;
            s.push('\n');
            Ok(s)
        }
        Format::Csv => {
            let mut w = csv::Writer::from_writer(Vec::new());
            let header: Vec<&str> =
                report.input_keys.iter().map(String::as_str).chain(VALUE_COLUMNS.iter().copied()).collect();
            w.write_record(&header)?;
            for row in &report.rows {
                let mut record: Vec<String> = row.inputs.iter().map(|e| e.value.render()).collect();
                for x in [row.computed.re, row.computed.im, row.oracle.re, row.oracle.im, row.abs_error, row.rel_error] {
                    record.push(fmt_f64(x));
                }
                w.write_record(&record)?;
            }
            let bytes = w.into_inner().map_err(|e| CliError::Io(e.into_error()))?;
            Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
        }
    }
}

/// Writes the rendered report to `path`, or to stdout when `path` is `None`.
pub fn emit_report(report: &Report, format: Format, path: Option<&Path>) -> Result<(), CliError> {
    let text = render(report, format)?;
    match path {
        Some(p) => std::fs::write(p, text)?,
        None => std::io::stdout().lock().write_all(text.as_bytes())?,
    }
    Ok(())
}
