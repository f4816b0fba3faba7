//! Scoring of decision logs: convergence time, wrong decisions, threshold
//! violations and transmission savings.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{QualityThreshold, SamplingInterval};
use crate::sim::{DecisionLogEntry, RunResult};
use crate::synth::GroundTruth;

/// Share of the remaining decisions that must pick the expected interval.
pub const CONVERGENCE_SHARE: (u64, u64) = (3, 4);

/// Half-open time window `[start, end)` in epoch seconds.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Window {
    pub start: i64,
    pub end: i64,
}

impl Window {
    pub fn new(start: i64, end: i64) -> Self {
        Self { start, end }
    }

    pub fn len(&self) -> i64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end <= self.start
    }

    pub fn contains(&self, t: i64) -> bool {
        self.start <= t && t < self.end
    }

    pub fn entries<'a>(&self, log: &'a [DecisionLogEntry]) -> &'a [DecisionLogEntry] {
        let lo = log.partition_point(|e| e.time < self.start);
        let hi = log.partition_point(|e| e.time < self.end);
        &log[lo..hi]
    }

    pub fn intersect(&self, other: &Window) -> Window {
        Window::new(self.start.max(other.start), self.end.min(other.end))
    }
}

fn window_entries<'a>(log: &'a [DecisionLogEntry], window: &Window) -> Result<&'a [DecisionLogEntry]> {
    let entries = window.entries(log);
    if entries.is_empty() {
        Err(Error::EmptyWindow)
    } else {
        Ok(entries)
    }
}

fn correctness(entries: &[DecisionLogEntry], truth: &GroundTruth) -> Result<Vec<bool>> {
    entries
        .iter()
        .map(|e| Ok(e.interval_after == truth.expected_interval(e.time)?))
        .collect()
}

/// Seconds from `window.start` to the first decision that picks the expected
/// interval and is followed (itself included) by at least 75% decisions that
/// also pick it. `None` when no decision qualifies.
pub fn convergence_time(
    log: &[DecisionLogEntry],
    truth: &GroundTruth,
    window: &Window,
) -> Result<Option<i64>> {
    let entries = window_entries(log, window)?;
    let correct = correctness(entries, truth)?;
    let (num, den) = CONVERGENCE_SHARE;
    let mut suffix_correct = 0u64;
    let mut earliest = None;
    for (i, ok) in correct.iter().enumerate().rev() {
        suffix_correct += u64::from(*ok);
        let suffix_len = (correct.len() - i) as u64;
        if *ok && den * suffix_correct >= num * suffix_len {
            earliest = Some(i);
        }
    }
    Ok(earliest.map(|i| entries[i].time - window.start))
}

/// Fraction of decisions in `window` whose resulting interval is not the expected one.
pub fn wrong_decision_rate(
    log: &[DecisionLogEntry],
    truth: &GroundTruth,
    window: &Window,
) -> Result<f64> {
    let entries = window_entries(log, window)?;
    let correct = correctness(entries, truth)?;
    let wrong = correct.iter().filter(|ok| !**ok).count();
    Ok(wrong as f64 / correct.len() as f64)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct OverThresholdStats {
    pub pairs: usize,
    pub over: usize,
    pub rate: f64,
    /// Mean difference among the pairs above the threshold, 0 when there are none.
    pub mean_delta_over: f64,
    pub mean_abs_delta: f64,
}

/// Threshold violations among consecutive-measurement pairs ending in `window`.
pub fn over_threshold_stats(
    log: &[DecisionLogEntry],
    tau: QualityThreshold,
    window: &Window,
) -> Result<OverThresholdStats> {
    let deltas: Vec<f64> = window.entries(log).iter().filter_map(|e| e.delta).collect();
    if deltas.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let over: Vec<f64> = deltas.iter().copied().filter(|d| !tau.is_met(*d)).collect();
    let mean = |xs: &[f64]| {
        if xs.is_empty() {
            0.0
        } else {
            xs.iter().sum::<f64>() / xs.len() as f64
        }
    };
    Ok(OverThresholdStats {
        pairs: deltas.len(),
        over: over.len(),
        rate: over.len() as f64 / deltas.len() as f64,
        mean_delta_over: mean(&over),
        mean_abs_delta: mean(&deltas),
    })
}

/// `1 - transmissions / (transmissions at 30 s)` over the scored window,
/// command transmissions included.
pub fn tx_reduction(result: &RunResult) -> Result<f64> {
    let max = result.scored_max_tx();
    if max == 0 {
        return Err(Error::EmptyWindow);
    }
    Ok(1.0 - result.scored_tx() as f64 / max as f64)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WindowReport {
    pub start: i64,
    pub end: i64,
    pub expected_interval: SamplingInterval,
    /// Seconds from the window start; `None` when not converged.
    pub convergence_s: Option<i64>,
    pub wrong_decision_rate: f64,
}

impl WindowReport {
    /// Convergence time, charging the full window length when not converged.
    pub fn penalized_convergence(&self) -> f64 {
        self.convergence_s.unwrap_or(self.end - self.start) as f64
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    /// Mean convergence over the truth windows, with unconverged windows
    /// charged their full length. `None` without ground truth.
    pub convergence_s: Option<f64>,
    pub converged_windows: usize,
    pub wrong_decision_rate: Option<f64>,
    pub over_threshold: OverThresholdStats,
    pub tx_reduction: f64,
    pub decisions: usize,
    pub total_tx: u64,
    pub max_tx: u64,
    /// One entry per constant stretch of the ground truth (one per day for
    /// Evolving scenarios).
    pub windows: Vec<WindowReport>,
}

impl RunReport {
    pub fn all_converged(&self) -> bool {
        !self.windows.is_empty() && self.converged_windows == self.windows.len()
    }
}

/// Scores the window `[result.score_start, result.end)`.
pub fn evaluate(result: &RunResult, truth: Option<&GroundTruth>) -> Result<RunReport> {
    let scored = Window::new(result.score_start, result.end);
    let entries = window_entries(&result.log, &scored)?;
    let over_threshold = over_threshold_stats(&result.log, result.tau, &scored)?;

    let mut windows = Vec::new();
    let mut overall_wrong = None;
    if let Some(truth) = truth {
        for segment in &truth.segments {
            let w = scored.intersect(&Window::new(segment.start, segment.end));
            if w.is_empty() || w.entries(&result.log).is_empty() {
                continue;
            }
            windows.push(WindowReport {
                start: w.start,
                end: w.end,
                expected_interval: segment.interval,
                convergence_s: convergence_time(&result.log, truth, &w)?,
                wrong_decision_rate: wrong_decision_rate(&result.log, truth, &w)?,
            });
        }
        overall_wrong = Some(wrong_decision_rate(&result.log, truth, &scored)?);
    }
    let convergence_s = if windows.is_empty() {
        None
    } else {
        Some(windows.iter().map(WindowReport::penalized_convergence).sum::<f64>() / windows.len() as f64)
    };

    Ok(RunReport {
        convergence_s,
        converged_windows: windows.iter().filter(|w| w.convergence_s.is_some()).count(),
        wrong_decision_rate: overall_wrong,
        over_threshold,
        tx_reduction: tx_reduction(result)?,
        decisions: entries.len(),
        total_tx: result.scored_tx(),
        max_tx: result.scored_max_tx(),
        windows,
    })
}

/// Mean of several run reports.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AggregateMetrics {
    pub runs: usize,
    pub convergence_s: Option<f64>,
    pub wrong_decision_rate: Option<f64>,
    /// Averaged only over runs whose scenario is informative for threshold violations.
    pub over_threshold_rate: Option<f64>,
    pub mean_delta_over: Option<f64>,
    pub mean_abs_delta: f64,
    pub tx_reduction: f64,
}

fn mean_of(values: impl Iterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values.fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Averages reports; each is paired with whether its scenario counts toward
/// the over-threshold columns (Controlled 30 and 240 do not).
pub fn aggregate(reports: &[(&RunReport, bool)]) -> Result<AggregateMetrics> {
    if reports.is_empty() {
        return Err(Error::EmptyWindow);
    }
    let over: Vec<&RunReport> = reports.iter().filter(|(_, c)| *c).map(|(r, _)| *r).collect();
    Ok(AggregateMetrics {
        runs: reports.len(),
        convergence_s: mean_of(reports.iter().filter_map(|(r, _)| r.convergence_s)),
        wrong_decision_rate: mean_of(reports.iter().filter_map(|(r, _)| r.wrong_decision_rate)),
        over_threshold_rate: mean_of(over.iter().map(|r| r.over_threshold.rate)),
        mean_delta_over: mean_of(over.iter().map(|r| r.over_threshold.mean_delta_over)),
        mean_abs_delta: mean_of(reports.iter().map(|(r, _)| r.over_threshold.mean_abs_delta))
            .unwrap_or(0.0),
        tx_reduction: mean_of(reports.iter().map(|(r, _)| r.tx_reduction)).unwrap_or(0.0),
    })
}
