//! Named scenarios: the built-in synthetic suites and trace files.

use std::fmt;
use std::fs::File;
use std::io::BufReader;
use std::path::PathBuf;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{QualityThreshold, SamplingInterval};
use crate::signal::{SignalSource, GRID_STEP, SECONDS_PER_DAY};
use crate::sim::DEFAULT_CALIBRATION_SECONDS;
use crate::synth::{
    generate_controlled, generate_evolving, ControlledLevel, ControlledSpec, EvolvingSpec,
    EvolvingVariant, GroundTruth, TruthSegment,
};
use crate::trace::{add_noise, parse_records, regrid, TraceFormat, DEFAULT_NOISE_SIGMA};

/// Length of a built-in Controlled run.
pub const CONTROLLED_DAYS: i64 = 2;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Builtin {
    Controlled(ControlledLevel),
    Evolving(EvolvingVariant),
}

impl Builtin {
    pub const ALL: [Builtin; 7] = [
        Builtin::Controlled(ControlledLevel::C30),
        Builtin::Controlled(ControlledLevel::C60),
        Builtin::Controlled(ControlledLevel::C120),
        Builtin::Controlled(ControlledLevel::C240),
        Builtin::Evolving(EvolvingVariant::I),
        Builtin::Evolving(EvolvingVariant::II),
        Builtin::Evolving(EvolvingVariant::III),
    ];

    pub fn controlled_suite() -> [Builtin; 4] {
        ControlledLevel::ALL.map(Builtin::Controlled)
    }

    pub fn evolving_suite() -> [Builtin; 3] {
        EvolvingVariant::ALL.map(Builtin::Evolving)
    }

    pub fn name(&self) -> String {
        match self {
            Builtin::Controlled(level) => {
                format!("controlled-{}", level.expected_interval().seconds())
            }
            Builtin::Evolving(v) => format!(
                "evolving-{}",
                match v {
                    EvolvingVariant::I => "i",
                    EvolvingVariant::II => "ii",
                    EvolvingVariant::III => "iii",
                }
            ),
        }
    }

    pub fn build(&self, tau: QualityThreshold) -> Result<Scenario> {
        match *self {
            Builtin::Controlled(level) => {
                let mut spec = ControlledSpec::new(level, CONTROLLED_DAYS * SECONDS_PER_DAY);
                spec.tau = tau;
                let signal = generate_controlled(&spec)?;
                let truth = GroundTruth::constant(signal.start, signal.end(), level.expected_interval());
                Ok(Scenario {
                    name: self.name(),
                    signal,
                    truth: Some(truth),
                    counts_toward_over_tau: level.counts_toward_over_tau(),
                    calibration_duration: 0,
                })
            }
            Builtin::Evolving(variant) => {
                let mut spec = EvolvingSpec::new(variant);
                spec.tau = tau;
                let (signal, truth) = generate_evolving(&spec)?;
                Ok(Scenario {
                    name: self.name(),
                    signal,
                    truth: Some(truth),
                    counts_toward_over_tau: true,
                    calibration_duration: 0,
                })
            }
        }
    }
}

impl fmt::Display for Builtin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name())
    }
}

impl FromStr for Builtin {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let normalized = s.trim().to_ascii_lowercase().replace(['_', ' '], "-");
        Builtin::ALL
            .into_iter()
            .find(|b| b.name() == normalized)
            .or(match normalized.as_str() {
                "evolving-1" => Some(Builtin::Evolving(EvolvingVariant::I)),
                "evolving-2" => Some(Builtin::Evolving(EvolvingVariant::II)),
                "evolving-3" => Some(Builtin::Evolving(EvolvingVariant::III)),
                _ => None,
            })
            .ok_or_else(|| Error::InvalidScenario(format!("unknown builtin scenario '{s}'")))
    }
}

/// A trace file replayed as a scenario.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceScenario {
    pub path: PathBuf,
    #[serde(default = "default_format")]
    pub format: TraceFormat,
    /// Node to replay; the lowest id in the file when absent.
    #[serde(default)]
    pub node: Option<u32>,
    #[serde(default = "default_sigma")]
    pub noise_sigma: f64,
    /// Optional `epoch_s,expected_interval_s` file.
    #[serde(default)]
    pub truth: Option<PathBuf>,
    #[serde(default)]
    pub name: Option<String>,
}

fn default_format() -> TraceFormat {
    TraceFormat::IntelLab
}

fn default_sigma() -> f64 {
    DEFAULT_NOISE_SIGMA
}

impl TraceScenario {
    pub fn new(path: impl Into<PathBuf>, format: TraceFormat) -> Self {
        Self {
            path: path.into(),
            format,
            node: None,
            noise_sigma: DEFAULT_NOISE_SIGMA,
            truth: None,
            name: None,
        }
    }

    pub fn name(&self) -> String {
        self.name.clone().unwrap_or_else(|| {
            let stem = self
                .path
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_else(|| "trace".into());
            match self.node {
                Some(n) => format!("{stem}#{n}"),
                None => stem,
            }
        })
    }

    /// Loads, regrids and perturbs the trace. The noise realization is fixed
    /// by `noise_seed`.
    pub fn build(&self, noise_seed: u64) -> Result<Scenario> {
        let file = File::open(&self.path)?;
        let parsed = parse_records(BufReader::new(file), self.format)?;
        if parsed.report.skipped > 0 {
            log::info!("{}: {}", self.path.display(), parsed.report);
        }
        let node = match self.node {
            Some(n) => n,
            None => *parsed
                .node_ids()
                .first()
                .ok_or(Error::NoRecords { skipped: parsed.report.skipped })?,
        };
        let records = parsed.for_node(node);
        let trace = regrid(&records, GRID_STEP)?;
        let mut rng = ChaCha8Rng::seed_from_u64(noise_seed);
        let signal = add_noise(&trace, self.noise_sigma, &mut rng)?;
        let truth = match &self.truth {
            Some(p) => Some(read_truth(File::open(p)?, signal.end())?),
            None => None,
        };
        let calibration_duration = DEFAULT_CALIBRATION_SECONDS.min(signal.span() / 2);
        Ok(Scenario {
            name: self.name(),
            signal,
            truth,
            counts_toward_over_tau: true,
            calibration_duration,
        })
    }
}

/// Reference to a scenario in a sweep file: a builtin name or a trace table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ScenarioRef {
    Builtin(String),
    Trace(TraceScenario),
}

impl ScenarioRef {
    pub fn name(&self) -> String {
        match self {
            ScenarioRef::Builtin(s) => s
                .parse::<Builtin>()
                .map(|b| b.name())
                .unwrap_or_else(|_| s.clone()),
            ScenarioRef::Trace(t) => t.name(),
        }
    }

    pub fn build(&self, tau: QualityThreshold, seed: u64) -> Result<Scenario> {
        match self {
            ScenarioRef::Builtin(s) => s.parse::<Builtin>()?.build(tau),
            ScenarioRef::Trace(t) => t.build(seed),
        }
    }
}

impl From<Builtin> for ScenarioRef {
    fn from(b: Builtin) -> Self {
        ScenarioRef::Builtin(b.name())
    }
}

/// A ready-to-run signal with its optional ground truth.
#[derive(Clone, Debug, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub signal: SignalSource,
    pub truth: Option<GroundTruth>,
    /// Whether threshold violations on this scenario are informative.
    pub counts_toward_over_tau: bool,
    /// Default forced-exploration length, in seconds.
    pub calibration_duration: i64,
}

/// Writes `epoch_s,expected_interval_s`, one row per 30 s grid point.
pub fn write_truth<W: std::io::Write>(out: W, signal: &SignalSource, truth: &GroundTruth) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["epoch_s", "expected_interval_s"])?;
    for (t, _) in signal.iter() {
        let interval = truth.expected_interval(t)?;
        w.write_record([t.to_string(), interval.seconds().to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a truth sidecar back into constant segments. The last segment
/// extends to `end`.
pub fn read_truth<R: std::io::Read>(input: R, end: i64) -> Result<GroundTruth> {
    let mut reader = csv::Reader::from_reader(input);
    let mut segments: Vec<TruthSegment> = Vec::new();
    for row in reader.records() {
        let row = row?;
        let bad = || Error::InvalidScenario(format!("bad truth row {:?}", row));
        let t: i64 = row.get(0).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let secs: u32 = row.get(1).and_then(|v| v.trim().parse().ok()).ok_or_else(bad)?;
        let interval = SamplingInterval::from_seconds(secs)?;
        match segments.last_mut() {
            Some(last) if last.interval == interval => continue,
            Some(last) => last.end = t,
            None => {}
        }
        segments.push(TruthSegment { start: t, end, interval });
    }
    if segments.is_empty() {
        return Err(Error::InvalidScenario("empty ground-truth file".into()));
    }
    Ok(GroundTruth { segments })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtin_names_round_trip() {
        for b in Builtin::ALL {
            assert_eq!(b.name().parse::<Builtin>().unwrap(), b);
        }
        assert_eq!(
            "Evolving_II".parse::<Builtin>().unwrap(),
            Builtin::Evolving(EvolvingVariant::II)
        );
        assert!("controlled-90".parse::<Builtin>().is_err());
    }

    #[test]
    fn builtin_shapes() {
        let c = Builtin::Controlled(ControlledLevel::C60).build(QualityThreshold::default()).unwrap();
        assert_eq!(c.signal.span(), 2 * SECONDS_PER_DAY);
        assert!(c.counts_toward_over_tau);
        assert_eq!(c.calibration_duration, 0);
        let c = Builtin::Controlled(ControlledLevel::C240).build(QualityThreshold::default()).unwrap();
        assert!(!c.counts_toward_over_tau);
        let e = Builtin::Evolving(EvolvingVariant::III).build(QualityThreshold::default()).unwrap();
        assert_eq!(e.truth.unwrap().segments.len(), 4);
    }

    #[test]
    fn truth_sidecar_round_trip() {
        let e = Builtin::Evolving(EvolvingVariant::II).build(QualityThreshold::default()).unwrap();
        let truth = e.truth.unwrap();
        let mut buf = Vec::new();
        write_truth(&mut buf, &e.signal, &truth).unwrap();
        let back = read_truth(buf.as_slice(), e.signal.end()).unwrap();
        assert_eq!(back, truth);
    }

    #[test]
    fn scenario_ref_json_forms() {
        let refs: Vec<ScenarioRef> = serde_json::from_str(
            r#"["controlled-60", {"path": "a/node.txt", "node": 3}]"#,
        )
        .unwrap();
        assert_eq!(refs[0].name(), "controlled-60");
        match &refs[1] {
            ScenarioRef::Trace(t) => {
                assert_eq!(t.format, TraceFormat::IntelLab);
                assert_eq!(t.noise_sigma, DEFAULT_NOISE_SIGMA);
                assert_eq!(t.name(), "node#3");
            }
            other => panic!("unexpected {other:?}"),
        }
    }
}
