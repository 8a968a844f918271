//! Tabular reports with fixed column order and fixed float formatting.
//!
//! Metrics render with four decimals and no leading zero (`.3793`), ratios
//! (percentages) with two decimals, other reals with six. Missing values
//! render as `-` in TSV and `null` in JSON.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde_json::{json, Value};

pub const TOOL_NAME: &str = "translens";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Text(String),
    Int(i64),
    /// Ranking metric in `[0, 1]` (or a difference of two).
    Metric(f64),
    /// Percentage.
    Ratio(f64),
    Real(f64),
    Missing,
}

impl Cell {
    pub fn text(s: impl Into<String>) -> Self {
        Cell::Text(s.into())
    }

    pub fn int(x: impl TryInto<i64>) -> Self {
        x.try_into().map(Cell::Int).unwrap_or(Cell::Missing)
    }

    pub fn metric(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Metric)
    }

    pub fn ratio(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Ratio)
    }

    pub fn real(x: Option<f64>) -> Self {
        x.map_or(Cell::Missing, Cell::Real)
    }

    pub fn render(&self) -> String {
        match self {
            Cell::Text(s) => s.clone(),
            Cell::Int(x) => x.to_string(),
            Cell::Metric(x) => format_metric(*x),
            Cell::Ratio(x) => fixed(*x, 2),
            Cell::Real(x) => fixed(*x, 6),
            Cell::Missing => "-".to_owned(),
        }
    }

    fn to_json(&self) -> Value {
        match self {
            Cell::Text(s) => json!(s),
            Cell::Int(x) => json!(x),
            Cell::Metric(x) => rounded(*x, 4),
            Cell::Ratio(x) => rounded(*x, 2),
            Cell::Real(x) => rounded(*x, 6),
            Cell::Missing => Value::Null,
        }
    }
}

fn fixed(x: f64, places: usize) -> String {
    let s = format!("{x:.places$}");
    // avoid "-0.00"
    if s.starts_with('-') && s[1..].chars().all(|c| c == '0' || c == '.') {
        s[1..].to_owned()
    } else {
        s
    }
}

/// `0.37931 -> ".3793"`, `-0.0123 -> "-.0123"`, `1.0 -> "1.0000"`.
pub fn format_metric(x: f64) -> String {
    let s = fixed(x, 4);
    if let Some(rest) = s.strip_prefix("0.") {
        format!(".{rest}")
    } else if let Some(rest) = s.strip_prefix("-0.") {
        format!("-.{rest}")
    } else {
        s
    }
}

fn rounded(x: f64, places: i32) -> Value {
    if !x.is_finite() {
        return Value::Null;
    }
    let scale = 10f64.powi(places);
    let r = (x * scale).round() / scale;
    json!(if r == 0.0 { 0.0 } else { r })
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Provenance {
    pub tool_version: String,
    /// `(path, sha256 hex)` for each input file.
    pub inputs: Vec<(String, String)>,
    pub config: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new() -> Self {
        Self {
            tool_version: format!("{TOOL_NAME} {TOOL_VERSION}"),
            ..Self::default()
        }
    }

    fn to_json(&self) -> Value {
        let inputs: Vec<Value> = self
            .inputs
            .iter()
            .map(|(p, h)| json!({ "path": p, "sha256": h }))
            .collect();
        let config: serde_json::Map<String, Value> =
            self.config.iter().map(|(k, v)| (k.clone(), json!(v))).collect();
        json!({ "tool": self.tool_version, "inputs": inputs, "config": config })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub name: String,
    pub columns: Vec<String>,
    pub rows: Vec<Vec<Cell>>,
    pub provenance: Option<Provenance>,
}

impl Report {
    pub fn new(name: impl Into<String>, columns: impl IntoIterator<Item = impl Into<String>>) -> Self {
        Self {
            name: name.into(),
            columns: columns.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
            provenance: None,
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len(), "row width mismatch in {}", self.name);
        self.rows.push(row);
    }

    pub fn with_provenance(mut self, p: Option<Provenance>) -> Self {
        self.provenance = p;
        self
    }

    /// Column position by name.
    pub fn column(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c == name)
    }

    /// Provenance as `#` comment lines, then the header, then rows.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        if let Some(p) = &self.provenance {
            let _ = writeln!(out, "# report: {}", self.name);
            let _ = writeln!(out, "# tool: {}", p.tool_version);
            for (path, hash) in &p.inputs {
                let _ = writeln!(out, "# input: {path} sha256={hash}");
            }
            for (k, v) in &p.config {
                let _ = writeln!(out, "# config: {k}={v}");
            }
        }
        out.push_str(&self.columns.join("\t"));
        out.push('\n');
        for row in &self.rows {
            let cells: Vec<String> = row.iter().map(Cell::render).collect();
            out.push_str(&cells.join("\t"));
            out.push('\n');
        }
        out
    }

    pub fn to_json(&self) -> String {
        let rows: Vec<Value> = self
            .rows
            .iter()
            .map(|r| Value::Array(r.iter().map(Cell::to_json).collect()))
            .collect();
        let mut doc = serde_json::Map::new();
        doc.insert("report".into(), json!(self.name));
        if let Some(p) = &self.provenance {
            doc.insert("provenance".into(), p.to_json());
        }
        doc.insert("columns".into(), json!(self.columns));
        doc.insert("rows".into(), Value::Array(rows));
        let mut s = serde_json::to_string_pretty(&Value::Object(doc)).expect("JSON value serializes");
        s.push('\n');
        s
    }
}
