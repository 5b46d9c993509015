use std::collections::BTreeMap;

use serde::Serialize;

/// One verified quantity: passes when `error ≤ tolerance × tolerance_scale`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub columns: Vec<String>,
    pub rows: Vec<Vec<f64>>,
}

impl Table {
    pub fn new(columns: &[&str]) -> Self {
        Self {
            columns: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<f64>) {
        debug_assert_eq!(row.len(), self.columns.len());
        self.rows.push(row);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub subcommand: String,
    pub seed: u64,
    pub tolerance_scale: f64,
    pub config: serde_json::Value,
    pub checks: Vec<Check>,
    pub tables: BTreeMap<String, Table>,
    pub pass: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub runtime_ms: Option<u64>,
}

/// Accumulates checks and tables for one subcommand run.
#[derive(Debug)]
pub struct ReportBuilder {
    scale: f64,
    seed: u64,
    checks: Vec<Check>,
    tables: BTreeMap<String, Table>,
}

impl ReportBuilder {
    pub fn new(tolerance_scale: f64, seed: u64) -> Self {
        Self {
            scale: tolerance_scale,
            seed,
            checks: Vec::new(),
            tables: BTreeMap::new(),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn check(&mut self, name: impl Into<String>, value: f64, error: f64, tolerance: f64) {
        let pass = error.is_finite() && error <= tolerance * self.scale;
        self.checks.push(Check {
            name: name.into(),
            value,
            error,
            tolerance,
            pass,
        });
    }

    /// |value − expected| against a tolerance.
    pub fn compare(&mut self, name: impl Into<String>, value: f64, expected: f64, tolerance: f64) {
        self.check(name, value, (value - expected).abs(), tolerance);
    }

    /// A condition without a numeric margin.
    pub fn require(&mut self, name: impl Into<String>, value: f64, holds: bool) {
        self.check(name, value, if holds { 0.0 } else { 1.0 }, 0.0);
    }

    pub fn table(&mut self, name: impl Into<String>, table: Table) {
        self.tables.insert(name.into(), table);
    }

    pub fn finish(self, subcommand: &str, config: serde_json::Value) -> Report {
        let pass = self.checks.iter().all(|c| c.pass);
        Report {
            subcommand: subcommand.to_string(),
            seed: self.seed,
            tolerance_scale: self.scale,
            config,
            checks: self.checks,
            tables: self.tables,
            pass,
            runtime_ms: None,
        }
    }
}

impl Report {
    pub fn to_json(&self) -> serde_json::Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Checks as `check,name,value,error,tolerance,pass` records, then each
    /// table as `table,<name>,<columns…>` followed by `row,<name>,<values…>`.
    pub fn to_csv(&self) -> Result<String, csv::Error> {
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        w.write_record(["check", "name", "value", "error", "tolerance", "pass"])?;
        for c in &self.checks {
            w.write_record([
                "check".to_string(),
                c.name.clone(),
                format!("{:?}", c.value),
                format!("{:?}", c.error),
                format!("{:?}", c.tolerance),
                c.pass.to_string(),
            ])?;
        }
        for (name, t) in &self.tables {
            let mut header = vec!["table".to_string(), name.clone()];
            header.extend(t.columns.iter().cloned());
            w.write_record(&header)?;
            for row in &t.rows {
                let mut rec = vec!["row".to_string(), name.clone()];
                rec.extend(row.iter().map(|v| format!("{v:?}")));
                w.write_record(&rec)?;
            }
        }
        w.write_record(["pass", &self.pass.to_string()])?;
        let bytes = w.into_inner().map_err(|e| e.into_error())?;
        Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
    }
}
