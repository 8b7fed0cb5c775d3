//! Aggregate report types and their JSON / CSV / text renderings.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::ExperimentConfig;
use crate::oracle::MatchMode;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Full,
    Truncated,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Bucket {
    pub iter: usize,
    pub all: usize,
    pub passed: usize,
    pub rate: f64,
}

impl Bucket {
    pub fn new(iter: usize, all: usize, passed: usize) -> Self {
        Self {
            iter,
            all,
            passed,
            rate: rate(passed, all),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub all: usize,
    pub passed: usize,
    pub rate: f64,
}

impl Totals {
    pub fn new(all: usize, passed: usize) -> Self {
        Self {
            all,
            passed,
            rate: rate(passed, all),
        }
    }
}

fn rate(passed: usize, all: usize) -> f64 {
    if all == 0 {
        0.0
    } else {
        passed as f64 / all as f64
    }
}

/// Overall totals re-scored under one success criterion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriterionTotals {
    pub criterion: MatchMode,
    #[serde(flatten)]
    pub totals: Totals,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub seed: u64,
    pub iter: usize,
    pub converged: bool,
    pub success: bool,
    pub certified: usize,
    pub exact_inputs: usize,
    pub aggregates: usize,
    pub mismatches: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub config: ExperimentConfig,
    pub regime: Regime,
    pub buckets: Vec<Bucket>,
    pub total: Totals,
    /// The same trials scored under every criterion.
    #[serde(default)]
    pub criteria: Vec<CriterionTotals>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trials: Option<Vec<TrialRecord>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReportFormat {
    Json,
    Csv,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "json" => Ok(Self::Json),
            "csv" => Ok(Self::Csv),
            other => Err(Error::Config(format!("unknown report format {other:?}"))),
        }
    }
}

impl AggregateReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report is always serializable")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        serde_json::from_str(s).map_err(|e| Error::Config(format!("invalid report JSON: {e}")))
    }

    /// One row per iteration bucket, then a `Total` row.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("iter,all,passed,rate\n");
        for b in &self.buckets {
            let _ = writeln!(out, "{},{},{},{}", b.iter, b.all, b.passed, b.rate);
        }
        let _ = writeln!(
            out,
            "Total,{},{},{}",
            self.total.all, self.total.passed, self.total.rate
        );
        out
    }

    /// Plain-text table with All / Passed / Passed-rate columns.
    pub fn to_table(&self) -> String {
        let regime = match (self.regime, self.config.truncate_l) {
            (Regime::Truncated, Some(l)) => format!("truncated (last {l})"),
            _ => "full".to_string(),
        };
        let mut out = format!("regime: {regime}\n");
        let _ = writeln!(
            out,
            "{:>6} {:>7} {:>7} {:>12}",
            "Iter.", "All", "Passed", "Passed rate"
        );
        for b in &self.buckets {
            let _ = writeln!(
                out,
                "{:>6} {:>7} {:>7} {:>11.1}%",
                b.iter,
                b.all,
                b.passed,
                b.rate * 100.0
            );
        }
        let _ = writeln!(
            out,
            "{:>6} {:>7} {:>7} {:>11.1}%",
            "Total",
            self.total.all,
            self.total.passed,
            self.total.rate * 100.0
        );
        let _ = writeln!(out, "criterion: {}", self.config.criterion.name());
        for c in &self.criteria {
            let _ = writeln!(
                out,
                "  {:<17} {:>7} / {:<7} {:>6.1}%",
                c.criterion.name(),
                c.totals.passed,
                c.totals.all,
                c.totals.rate * 100.0
            );
        }
        out
    }

    pub fn render(&self, format: ReportFormat) -> String {
        match format {
            ReportFormat::Json => self.to_json(),
            ReportFormat::Csv => self.to_csv(),
        }
    }

    pub fn write(&self, path: impl AsRef<Path>, format: ReportFormat) -> Result<()> {
        let path = path.as_ref();
        if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(path, self.render(format)).map_err(|e| Error::io(path, e))
    }
}
