//! Experiment reports: JSON, an aligned text table and CSV.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::io;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::harness::config::{ExperimentConfig, Mode, Tolerances};

/// One design (or one verification) inside a trial.
///
/// `gap` is signed so that `gap >= -tolerances.gap` means the structured
/// design was not beaten: `oracle − structured` for minimized objectives,
/// `structured − oracle` for capacity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub index: usize,
    pub label: String,
    pub objective_structured: Option<f64>,
    pub objective_oracle_best: Option<f64>,
    pub gap: Option<f64>,
    pub power_used: Option<f64>,
    pub checks: BTreeMap<String, bool>,
    pub metrics: BTreeMap<String, f64>,
    pub passed: bool,
}

impl TrialRecord {
    pub fn new(index: usize, label: impl Into<String>) -> Self {
        Self {
            index,
            label: label.into(),
            objective_structured: None,
            objective_oracle_best: None,
            gap: None,
            power_used: None,
            checks: BTreeMap::new(),
            metrics: BTreeMap::new(),
            passed: true,
        }
    }

    pub fn check(&mut self, name: &str, ok: bool) {
        self.checks.insert(name.to_string(), ok);
        self.passed &= ok;
    }

    pub fn metric(&mut self, name: &str, value: f64) {
        self.metrics.insert(name.to_string(), value);
    }

    pub fn failed_checks(&self) -> Vec<&str> {
        self.checks.iter().filter(|(_, &ok)| !ok).map(|(k, _)| k.as_str()).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub trials: usize,
    pub records: usize,
    pub failures: usize,
    /// Worst (smallest) gap.
    pub min_gap: Option<f64>,
    pub max_gap: Option<f64>,
    /// Largest metric whose name ends in `discrepancy`.
    pub max_discrepancy: Option<f64>,
    pub wall_time_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub tool: String,
    pub version: String,
    pub mode: Mode,
    pub seed: u64,
    pub config: ExperimentConfig,
    pub tolerances: Tolerances,
    pub trials: Vec<TrialRecord>,
    pub aggregate: Aggregate,
    pub passed: bool,
}

fn fold_opt(values: impl Iterator<Item = f64>, pick: fn(f64, f64) -> f64) -> Option<f64> {
    values.fold(None, |acc, v| Some(acc.map_or(v, |a| pick(a, v))))
}

impl ExperimentReport {
    pub fn assemble(config: ExperimentConfig, records: Vec<TrialRecord>, wall_time_s: f64) -> Self {
        let failures = records.iter().filter(|r| !r.passed).count();
        let gaps = || records.iter().filter_map(|r| r.gap);
        let discrepancies = records
            .iter()
            .flat_map(|r| r.metrics.iter())
            .filter(|(k, _)| k.ends_with("discrepancy"))
            .map(|(_, &v)| v);
        let aggregate = Aggregate {
            trials: config.trials,
            records: records.len(),
            failures,
            min_gap: fold_opt(gaps(), f64::min),
            max_gap: fold_opt(gaps(), f64::max),
            max_discrepancy: fold_opt(discrepancies, f64::max),
            wall_time_s,
        };
        Self {
            tool: "matfield".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            mode: config.mode,
            seed: config.seed,
            tolerances: config.tolerances,
            config,
            trials: records,
            aggregate,
            passed: failures == 0,
        }
    }

    /// Copy with wall-clock fields zeroed, for reproducibility comparisons.
    pub fn without_timing(&self) -> Self {
        let mut r = self.clone();
        r.aggregate.wall_time_s = 0.0;
        r
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Numerical(format!("report serialization: {e}")))
    }

    pub fn text_table(&self) -> String {
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.9e}"));
        let header = ["trial", "label", "structured", "oracle", "gap", "power", "status"];
        let rows: Vec<[String; 7]> = self
            .trials
            .iter()
            .map(|r| {
                let status = if r.passed {
                    "pass".to_string()
                } else {
                    format!("FAIL ({})", r.failed_checks().join(", "))
                };
                [
                    r.index.to_string(),
                    r.label.clone(),
                    fmt(r.objective_structured),
                    fmt(r.objective_oracle_best),
                    fmt(r.gap),
                    fmt(r.power_used),
                    status,
                ]
            })
            .collect();
        let mut widths = header.map(str::len);
        for row in &rows {
            for (w, cell) in widths.iter_mut().zip(row) {
                *w = (*w).max(cell.len());
            }
        }
        let mut out = String::new();
        let line = |cells: &[String], out: &mut String| {
            let parts: Vec<String> = cells.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
            let _ = writeln!(out, "{}", parts.join("  ").trim_end());
        };
        line(&header.map(String::from), &mut out);
        line(&widths.map(|w| "-".repeat(w)), &mut out);
        for row in &rows {
            line(row, &mut out);
        }
        let a = &self.aggregate;
        let _ = writeln!(
            out,
            "\n{} seed={} trials={} records={} failures={} min_gap={} max_discrepancy={} wall={:.3}s => {}",
            self.mode,
            self.seed,
            a.trials,
            a.records,
            a.failures,
            fmt(a.min_gap),
            fmt(a.max_discrepancy),
            a.wall_time_s,
            if self.passed { "PASS" } else { "FAIL" }
        );
        out
    }

    /// One row per record. Metric and check columns are the union over all
    /// records, sorted by name; missing cells are empty.
    pub fn write_csv<W: io::Write>(&self, writer: W) -> Result<()> {
        let metrics: BTreeSet<&str> = self.trials.iter().flat_map(|r| r.metrics.keys().map(String::as_str)).collect();
        let checks: BTreeSet<&str> = self.trials.iter().flat_map(|r| r.checks.keys().map(String::as_str)).collect();
        let io_err = |e: csv::Error| Error::Config(format!("writing CSV: {e}"));
        let mut w = csv::Writer::from_writer(writer);
        let mut header: Vec<String> = ["index", "label", "objective_structured", "objective_oracle_best", "gap", "power_used", "passed"]
            .iter()
            .map(|s| s.to_string())
            .collect();
        header.extend(metrics.iter().map(|m| m.to_string()));
        header.extend(checks.iter().map(|c| format!("check:{c}")));
        w.write_record(&header).map_err(io_err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| format!("{x:e}"));
        for r in &self.trials {
            let mut row = vec![
                r.index.to_string(),
                r.label.clone(),
                opt(r.objective_structured),
                opt(r.objective_oracle_best),
                opt(r.gap),
                opt(r.power_used),
                r.passed.to_string(),
            ];
            row.extend(metrics.iter().map(|m| opt(r.metrics.get(*m).copied())));
            row.extend(checks.iter().map(|c| r.checks.get(*c).map_or(String::new(), |b| b.to_string())));
            w.write_record(&row).map_err(io_err)?;
        }
        w.flush().map_err(|e| Error::Config(format!("writing CSV: {e}")))?;
        Ok(())
    }
}
