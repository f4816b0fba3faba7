//! Grid sweeps of (alpha, gamma) over scenario suites and seeds.
//!
//! Runs are independent and seeded, so they execute in parallel; results are
//! collected in job order, which makes the output independent of scheduling.

use std::collections::HashMap;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::metrics::{aggregate, evaluate, RunReport};
use crate::report::ReportRow;
use crate::rl::{LearningParams, QualityThreshold};
use crate::scenario::{Scenario, ScenarioRef};
use crate::sim::{run_simulation, SimConfig};

fn default_grid() -> Vec<f64> {
    (1..=9).map(|i| f64::from(i) / 10.0).collect()
}

fn default_epsilon() -> f64 {
    LearningParams::DEFAULT_EPSILON
}

fn default_seeds() -> Vec<u64> {
    (1..=10).collect()
}

fn default_tau() -> f64 {
    QualityThreshold::DEFAULT_CELSIUS
}

/// Sweep description, usually read from `sweep.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepSpec {
    /// Label used in aggregate rows; scenario names joined by `+` when absent.
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default = "default_grid")]
    pub alphas: Vec<f64>,
    #[serde(default = "default_grid")]
    pub gammas: Vec<f64>,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    pub scenarios: Vec<ScenarioRef>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
    #[serde(default = "default_tau")]
    pub tau: f64,
    /// Overrides every scenario's calibration length when set.
    #[serde(default)]
    pub calibration_hours: Option<f64>,
    /// Worker threads; all cores when absent.
    #[serde(default)]
    pub workers: Option<usize>,
}

impl SweepSpec {
    pub fn new(scenarios: Vec<ScenarioRef>) -> Self {
        Self {
            name: None,
            alphas: default_grid(),
            gammas: default_grid(),
            epsilon: default_epsilon(),
            scenarios,
            seeds: default_seeds(),
            tau: default_tau(),
            calibration_hours: None,
            workers: None,
        }
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            self.scenarios
                .iter()
                .map(ScenarioRef::name)
                .collect::<Vec<_>>()
                .join("+")
        })
    }

    pub fn validate(&self) -> Result<()> {
        let empty = |what: &str| Err(Error::Config(format!("sweep needs at least one {what}")));
        if self.alphas.is_empty() {
            return empty("alpha");
        }
        if self.gammas.is_empty() {
            return empty("gamma");
        }
        if self.scenarios.is_empty() {
            return empty("scenario");
        }
        if self.seeds.is_empty() {
            return empty("seed");
        }
        QualityThreshold::new(self.tau)?;
        for s in &self.scenarios {
            if let ScenarioRef::Builtin(name) = s {
                name.parse::<crate::scenario::Builtin>()?;
            }
        }
        for &a in &self.alphas {
            for &g in &self.gammas {
                LearningParams::new(a, g, self.epsilon)?;
            }
        }
        if let Some(h) = self.calibration_hours {
            if !(h.is_finite() && h >= 0.0) {
                return Err(Error::InvalidParameter {
                    name: "calibration_hours",
                    value: h,
                });
            }
        }
        Ok(())
    }

    pub fn run_count(&self) -> usize {
        self.alphas.len() * self.gammas.len() * self.scenarios.len() * self.seeds.len()
    }
}

/// Outcome of a single (alpha, gamma, scenario, seed) run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub scenario: String,
    pub alpha: f64,
    pub gamma: f64,
    pub epsilon: f64,
    pub seed: u64,
    pub counts_toward_over_tau: bool,
    pub config: SimConfig,
    pub report: RunReport,
}

impl RunRecord {
    /// Short content hash of the scenario name and configuration.
    pub fn hash(&self) -> String {
        let payload = serde_json::to_string(&(&self.scenario, &self.config)).unwrap_or_default();
        let digest = Sha256::digest(payload.as_bytes());
        digest.iter().take(6).map(|b| format!("{b:02x}")).collect()
    }

    pub fn row(&self) -> ReportRow {
        ReportRow::from_run(&self.scenario, self.alpha, self.gamma, self.epsilon, self.seed, &self.report)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub runs: Vec<RunRecord>,
    /// One row per (alpha, gamma), sorted by ascending mean convergence time.
    pub aggregates: Vec<ReportRow>,
}

struct Job {
    scenario: usize,
    seed: u64,
    alpha: f64,
    gamma: f64,
}

fn build_config(spec: &SweepSpec, scenario: &Scenario, alpha: f64, gamma: f64, seed: u64) -> Result<SimConfig> {
    let params = LearningParams::new(alpha, gamma, spec.epsilon)?;
    let calibration = spec
        .calibration_hours
        .map(|h| (h * 3600.0).round() as i64)
        .unwrap_or(scenario.calibration_duration);
    Ok(SimConfig::new(params, seed)
        .with_calibration(calibration)
        .with_tau(QualityThreshold::new(spec.tau)?))
}

/// Runs one scenario under one configuration and scores it.
pub fn run_scenario(scenario: &Scenario, config: &SimConfig) -> Result<RunReport> {
    let result = run_simulation(&scenario.signal, config)?;
    evaluate(&result, scenario.truth.as_ref())
}

pub fn run_sweep(spec: &SweepSpec) -> Result<SweepResult> {
    spec.validate()?;
    let tau = QualityThreshold::new(spec.tau)?;

    // Builtins do not depend on the seed; trace noise does.
    let mut built: HashMap<(usize, u64), Arc<Scenario>> = HashMap::new();
    for (i, sref) in spec.scenarios.iter().enumerate() {
        let shared = match sref {
            ScenarioRef::Builtin(_) => Some(Arc::new(sref.build(tau, 0)?)),
            ScenarioRef::Trace(_) => None,
        };
        for &seed in &spec.seeds {
            let scenario = match &shared {
                Some(s) => Arc::clone(s),
                None => Arc::new(sref.build(tau, seed)?),
            };
            built.insert((i, seed), scenario);
        }
    }

    let mut jobs = Vec::with_capacity(spec.run_count());
    for &alpha in &spec.alphas {
        for &gamma in &spec.gammas {
            for scenario in 0..spec.scenarios.len() {
                for &seed in &spec.seeds {
                    jobs.push(Job {
                        scenario,
                        seed,
                        alpha,
                        gamma,
                    });
                }
            }
        }
    }

    let execute = |job: &Job| -> Result<RunRecord> {
        let scenario = &built[&(job.scenario, job.seed)];
        let label = format!(
            "{} alpha={} gamma={} seed={}",
            scenario.name, job.alpha, job.gamma, job.seed
        );
        let wrap = |e: Error| Error::RunFailed {
            label: label.clone(),
            source: Box::new(e),
        };
        let config = build_config(spec, scenario, job.alpha, job.gamma, job.seed).map_err(wrap)?;
        let report = run_scenario(scenario, &config).map_err(wrap)?;
        Ok(RunRecord {
            scenario: scenario.name.clone(),
            alpha: job.alpha,
            gamma: job.gamma,
            epsilon: spec.epsilon,
            seed: job.seed,
            counts_toward_over_tau: scenario.counts_toward_over_tau,
            config,
            report,
        })
    };

    let runs: Vec<RunRecord> = match spec.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build()
            .map_err(|e| Error::Config(e.to_string()))?
            .install(|| jobs.par_iter().map(execute).collect::<Result<_>>())?,
        None => jobs.par_iter().map(execute).collect::<Result<_>>()?,
    };

    let aggregates = aggregate_runs(spec, &runs)?;
    Ok(SweepResult { runs, aggregates })
}

/// Per-(alpha, gamma) means over scenarios and seeds, sorted by convergence.
pub fn aggregate_runs(spec: &SweepSpec, runs: &[RunRecord]) -> Result<Vec<ReportRow>> {
    let label = spec.label();
    let mut rows = Vec::new();
    for &alpha in &spec.alphas {
        for &gamma in &spec.gammas {
            let cell: Vec<(&RunReport, bool)> = runs
                .iter()
                .filter(|r| r.alpha == alpha && r.gamma == gamma)
                .map(|r| (&r.report, r.counts_toward_over_tau))
                .collect();
            if cell.is_empty() {
                continue;
            }
            let m = aggregate(&cell)?;
            rows.push(ReportRow::from_aggregate(&label, alpha, gamma, spec.epsilon, &m));
        }
    }
    // Stable: equal convergence keeps grid order; rows without one go last.
    rows.sort_by(|a, b| match (a.convergence_s, b.convergence_s) {
        (Some(x), Some(y)) => x.total_cmp(&y),
        (Some(_), None) => std::cmp::Ordering::Less,
        (None, Some(_)) => std::cmp::Ordering::Greater,
        (None, None) => std::cmp::Ordering::Equal,
    });
    Ok(rows)
}
