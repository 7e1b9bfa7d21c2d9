//! Result rows and their CSV and JSON forms.

use std::collections::BTreeMap;
use std::io::Write;

use anyhow::Result;
use serde::Serialize;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Pass,
    Fail,
    /// Reported without a tolerance.
    Info,
    Skipped,
}

/// One instance x algorithm x metric measurement.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Row {
    pub suite: &'static str,
    pub instance: u64,
    pub cell: &'static str,
    pub n: usize,
    #[serde(rename = "T")]
    pub steps: usize,
    pub algorithm: String,
    pub metric: String,
    pub value: f64,
    pub tolerance: Option<f64>,
    pub status: Status,
    pub note: String,
}

impl Row {
    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn is_failure(&self) -> bool {
        self.status == Status::Fail
    }
}

/// Rows for one suite run, with the checks they assert.
#[derive(Debug, Clone, Default, Serialize)]
pub struct Report {
    pub rows: Vec<Row>,
    /// Named aggregate checks that are not tied to one row.
    pub checks: BTreeMap<String, bool>,
    /// Wall time per suite stage in seconds; excluded from the CSV.
    pub wall_seconds: BTreeMap<String, f64>,
}

#[derive(Debug, Serialize)]
pub struct Summary {
    pub rows: usize,
    pub passed: usize,
    pub failed: usize,
    pub skipped: usize,
    pub flagged_instances: Vec<u64>,
    pub checks: BTreeMap<String, bool>,
    pub wall_seconds: BTreeMap<String, f64>,
    pub pass: bool,
}

impl Report {
    pub fn push(&mut self, row: Row) {
        self.rows.push(row);
    }

    pub fn extend(&mut self, other: Report) {
        self.rows.extend(other.rows);
        self.checks.extend(other.checks);
        self.wall_seconds.extend(other.wall_seconds);
    }

    pub fn check(&mut self, name: impl Into<String>, ok: bool) {
        self.checks.insert(name.into(), ok);
    }

    pub fn passed(&self) -> bool {
        !self.rows.iter().any(Row::is_failure) && self.checks.values().all(|&ok| ok)
    }

    /// Rows matching a metric name.
    pub fn metric<'a>(&'a self, metric: &'a str) -> impl Iterator<Item = &'a Row> + 'a {
        self.rows.iter().filter(move |r| r.metric == metric)
    }

    pub fn summary(&self) -> Summary {
        let count = |s: Status| self.rows.iter().filter(|r| r.status == s).count();
        let mut flagged: Vec<u64> = self.rows.iter().filter(|r| r.is_failure()).map(|r| r.instance).collect();
        flagged.sort_unstable();
        flagged.dedup();
        Summary {
            rows: self.rows.len(),
            passed: count(Status::Pass),
            failed: count(Status::Fail),
            skipped: count(Status::Skipped),
            flagged_instances: flagged,
            checks: self.checks.clone(),
            wall_seconds: self.wall_seconds.clone(),
            pass: self.passed(),
        }
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for row in &self.rows {
            w.serialize(row)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        #[derive(Serialize)]
        struct Doc<'a> {
            summary: Summary,
            rows: &'a [Row],
        }
        serde_json::to_writer_pretty(&mut out, &Doc { summary: self.summary(), rows: &self.rows })?;
        writeln!(out)?;
        Ok(())
    }
}

/// Status of `value <= tol`, failing on non-finite values.
pub fn within(value: f64, tol: f64) -> Status {
    if value <= tol {
        Status::Pass
    } else {
        Status::Fail
    }
}
