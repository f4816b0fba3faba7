use thiserror::Error;

use crate::rl::{Action, SamplingInterval};

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{0} s is not on the sampling-interval ladder (30, 60, 120, 240)")]
    InvalidInterval(u32),

    #[error("action {action} is not valid at interval {interval}")]
    InvalidAction {
        interval: SamplingInterval,
        action: Action,
    },

    #[error("quality threshold must be finite and positive, got {0}")]
    InvalidThreshold(f64),

    #[error("parameter {name} out of range: {value}")]
    InvalidParameter { name: &'static str, value: f64 },

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("time {t} s is outside the scenario span [{start}, {end})")]
    OutOfRange { t: i64, start: i64, end: i64 },

    #[error("time {t} s is not on the 30 s grid anchored at {start}")]
    OffGrid { t: i64, start: i64 },

    #[error("signal ends at {signal_end} s but the run needs values up to {needed} s")]
    SignalTooShort { signal_end: i64, needed: i64 },

    #[error("need at least two records spanning more than {step} s, got {count}")]
    InsufficientRecords { count: usize, step: i64 },

    #[error("no usable records in input ({skipped} lines skipped)")]
    NoRecords { skipped: usize },

    #[error("evaluation window is empty")]
    EmptyWindow,

    #[error("{0}")]
    Config(String),

    #[error("run {label} failed: {source}")]
    RunFailed {
        label: String,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
