//! Result tables, their CSV form and the JSON run record.

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::{Map, Value, json};

use crate::error::CliError;

/// Where a number came from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Provenance {
    /// Set by the configuration.
    Config,
    /// Monte-Carlo estimate.
    Empirical,
    /// Closed-form formula evaluated with estimated inputs.
    Analytic,
    /// Exact closed form.
    ClosedForm,
    /// Exact numerical contraction, no sampling.
    Exact,
    /// Measured by the harness (timings).
    Measured,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Num(f64),
    Int(u64),
    Text(String),
    Flag(bool),
    Empty,
}

impl Cell {
    /// CSV text: floats with 17 significant digits, integers plain.
    pub fn render(&self) -> String {
        match self {
            Cell::Num(v) if v.is_nan() => "nan".into(),
            Cell::Num(v) if v.is_infinite() => if *v > 0.0 { "inf".into() } else { "-inf".into() },
            Cell::Num(v) => format!("{v:.16e}"),
            Cell::Int(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Flag(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }

    fn json(&self, provenance: Provenance) -> Value {
        match self {
            Cell::Num(v) => json!({ "value": finite_or_null(*v), "provenance": provenance }),
            Cell::Int(v) => json!({ "value": v, "provenance": provenance }),
            Cell::Text(s) => Value::String(s.clone()),
            Cell::Flag(b) => Value::Bool(*b),
            Cell::Empty => Value::Null,
        }
    }
}

fn finite_or_null(v: f64) -> Value {
    if v.is_finite() { json!(v) } else { Value::Null }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Empty, Cell::Num)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Column {
    pub name: &'static str,
    pub provenance: Provenance,
}

pub const fn col(name: &'static str, provenance: Provenance) -> Column {
    Column { name, provenance }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Table {
    pub columns: Vec<Column>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(columns: Vec<Column>) -> Self {
        Self { columns, rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<String, CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(self.columns.iter().map(|c| c.name))?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        let bytes = w.into_inner().map_err(|e| CliError::Io(std::io::Error::other(e.to_string())))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    fn points(&self) -> Vec<Value> {
        self.rows
            .iter()
            .map(|row| {
                let mut m = Map::new();
                for (c, cell) in self.columns.iter().zip(row) {
                    m.insert(c.name.to_string(), cell.json(c.provenance));
                }
                Value::Object(m)
            })
            .collect()
    }
}

/// One pass/fail line.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CheckLine {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl CheckLine {
    pub fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Self { name: name.into(), pass, detail: detail.into() }
    }
}

/// Everything a command produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Outcome {
    pub command: &'static str,
    pub table: Table,
    /// Derived summaries such as fitted slopes.
    pub summary: Vec<(&'static str, f64, Provenance)>,
    pub checks: Vec<CheckLine>,
    /// Checks that decide the exit code; other commands only report.
    pub checks_gate: bool,
    pub notes: Vec<String>,
}

impl Outcome {
    pub fn new(command: &'static str, table: Table) -> Self {
        Self { command, table, summary: Vec::new(), checks: Vec::new(), checks_gate: false, notes: Vec::new() }
    }

    pub fn failed_checks(&self) -> Vec<&CheckLine> {
        self.checks.iter().filter(|c| !c.pass).collect()
    }

    pub fn run_record(&self, settings: &BTreeMap<String, String>, seed: u64, wall_time_s: f64) -> Value {
        let summary: Map<String, Value> = self
            .summary
            .iter()
            .map(|(k, v, p)| (k.to_string(), json!({ "value": finite_or_null(*v), "provenance": p })))
            .collect();
        json!({
            "command": self.command,
            "version": env!("CARGO_PKG_VERSION"),
            "seed": { "value": seed, "provenance": Provenance::Config },
            "config": settings,
            "points": self.table.points(),
            "summary": summary,
            "checks": self.checks,
            "wall_time_s": { "value": finite_or_null(wall_time_s), "provenance": Provenance::Measured },
        })
    }
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 || x.len() != y.len() {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    Some((slope, my - slope * mx))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cells_render_with_full_precision() {
        assert_eq!(Cell::Num(0.1).render(), "1.0000000000000001e-1");
        assert_eq!(Cell::Num(0.1).render().parse::<f64>().unwrap(), 0.1);
        assert_eq!(Cell::Num(f64::INFINITY).render(), "inf");
        assert_eq!(Cell::Int(7).render(), "7");
        assert_eq!(Cell::Empty.render(), "");
    }

    #[test]
    fn csv_and_json_shapes() {
        let mut t = Table::new(vec![col("n", Provenance::Config), col("var", Provenance::Empirical), col("note", Provenance::Config)]);
        t.push(vec![Cell::Int(2), Cell::Num(0.5), Cell::Text("a,b".into())]);
        assert_eq!(t.to_csv().unwrap(), "n,var,note\n2,5.0000000000000000e-1,\"a,b\"\n");
        let out = Outcome::new("variance", t);
        let rec = out.run_record(&BTreeMap::new(), 3, 0.25);
        assert_eq!(rec["points"][0]["var"]["provenance"], "empirical");
        assert_eq!(rec["points"][0]["n"]["value"], 2);
        assert_eq!(rec["seed"]["value"], 3);
    }

    #[test]
    fn fits_a_line() {
        let (s, c) = linear_fit(&[1.0, 2.0, 3.0], &[3.0, 5.0, 7.0]).unwrap();
        assert!((s - 2.0).abs() < 1e-14 && (c - 1.0).abs() < 1e-14);
        assert!(linear_fit(&[1.0], &[1.0]).is_none());
    }
}
