//! Tabular output of run and aggregate metrics.

use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{AggregateMetrics, RunReport};
use crate::sim::DecisionLogEntry;

/// One output row. Percentages are in 0–100; empty cells mean "not applicable".
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReportRow {
    pub scenario: String,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    /// Absent on rows averaged over seeds.
    pub seed: Option<u64>,
    pub convergence_s: Option<f64>,
    pub wrong_pct: Option<f64>,
    pub over_tau_pct: Option<f64>,
    pub mean_over_delta_c: Option<f64>,
    pub mean_abs_delta_c: f64,
    pub tx_reduction_pct: f64,
}

pub const COLUMNS: [&str; 11] = [
    "scenario",
    "alpha",
    "gamma",
    "epsilon",
    "seed",
    "convergence_s",
    "wrong_pct",
    "over_tau_pct",
    "mean_over_delta_c",
    "mean_abs_delta_c",
    "tx_reduction_pct",
];

impl ReportRow {
    pub fn from_run(
        scenario: &str,
        alpha: f64,
        gamma: f64,
        epsilon: f64,
        seed: u64,
        report: &RunReport,
    ) -> Self {
        Self {
            scenario: scenario.to_string(),
            alpha,
            gamma,
            epsilon,
            seed: Some(seed),
            convergence_s: report.convergence_s,
            wrong_pct: report.wrong_decision_rate.map(|r| 100.0 * r),
            over_tau_pct: Some(100.0 * report.over_threshold.rate),
            mean_over_delta_c: Some(report.over_threshold.mean_delta_over),
            mean_abs_delta_c: report.over_threshold.mean_abs_delta,
            tx_reduction_pct: 100.0 * report.tx_reduction,
        }
    }

    pub fn from_aggregate(scenario: &str, alpha: f64, gamma: f64, epsilon: f64, m: &AggregateMetrics) -> Self {
        Self {
            scenario: scenario.to_string(),
            alpha,
            gamma,
            epsilon,
            seed: None,
            convergence_s: m.convergence_s,
            wrong_pct: m.wrong_decision_rate.map(|r| 100.0 * r),
            over_tau_pct: m.over_threshold_rate.map(|r| 100.0 * r),
            mean_over_delta_c: m.mean_delta_over,
            mean_abs_delta_c: m.mean_abs_delta,
            tx_reduction_pct: 100.0 * m.tx_reduction,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

impl FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            "markdown" | "markdown-table" | "md" => Ok(Self::Markdown),
            other => Err(Error::Config(format!("unknown report format '{other}'"))),
        }
    }
}

pub fn emit_report(rows: &[ReportRow], format: ReportFormat) -> Result<String> {
    if rows.is_empty() {
        return Err(Error::Config("no report rows to emit".into()));
    }
    match format {
        ReportFormat::Csv => to_csv(rows),
        ReportFormat::Json => Ok(serde_json::to_string_pretty(rows)? + "\n"),
        ReportFormat::Markdown => Ok(to_markdown(rows)),
    }
}

fn to_csv(rows: &[ReportRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for row in rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
}

pub fn read_csv<R: std::io::Read>(input: R) -> Result<Vec<ReportRow>> {
    let mut r = csv::Reader::from_reader(input);
    r.deserialize().map(|row| row.map_err(Error::from)).collect()
}

/// Writes a decision log as CSV, one row per decision.
pub fn write_decision_log<W: std::io::Write>(out: W, log: &[DecisionLogEntry]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "epoch_s",
        "value_c",
        "delta_c",
        "quality_ok",
        "working_hour",
        "reward",
        "action",
        "interval_before_s",
        "interval_after_s",
        "tx_measurement",
        "tx_command",
    ])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for e in log {
        w.write_record([
            e.time.to_string(),
            e.observation.to_string(),
            opt(e.delta),
            u8::from(e.state.quality).to_string(),
            u8::from(e.state.working_hour).to_string(),
            opt(e.reward),
            e.action.to_string(),
            e.interval_before.seconds().to_string(),
            e.interval_after.seconds().to_string(),
            e.tx_measurement.to_string(),
            e.tx_command.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

fn cell(v: Option<f64>, precision: usize) -> String {
    v.map_or_else(|| "–".to_string(), |v| format!("{v:.precision$}"))
}

/// Five-column table: α, γ, convergence, wrong decisions, over-threshold share.
fn to_markdown(rows: &[ReportRow]) -> String {
    let mut out = String::from(
        "| α | γ | Convergence time (s) | % of wrong decisions | % of measurements over τ |\n\
         |---|---|---:|---:|---:|\n",
    );
    for r in rows {
        out.push_str(&format!(
            "| {} | {} | {} | {} | {} |\n",
            r.alpha,
            r.gamma,
            cell(r.convergence_s, 2),
            cell(r.wrong_pct, 2),
            cell(r.over_tau_pct, 2),
        ));
    }
    out.push_str(
        "\nUnconverged windows count as their full length in the convergence mean. \
         Over-τ shares are averaged over informative scenarios only \
         (Controlled 30 and Controlled 240 are left out).\n",
    );
    out
}
