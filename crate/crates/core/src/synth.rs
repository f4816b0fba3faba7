//! Synthetic "Controlled" and "Evolving" scenarios with a known optimal interval.
//!
//! A Controlled series moves by a fixed fraction of the threshold every 30 s.
//! The carrier is a triangle wave that reverses every 6 hours, so any window
//! of 240 s or less is monotone unless it straddles a reversal point.

use chrono::{NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rl::{QualityThreshold, SamplingInterval};
use crate::signal::{epoch_of, SignalSource, GRID_STEP, SECONDS_PER_DAY};

/// Grid steps between two direction reversals of the carrier (6 h).
pub const REVERSAL_STEPS: usize = 720;

pub const DEFAULT_START_VALUE: f64 = 20.0;

/// Monday 2004-03-01 00:00.
pub fn default_start() -> NaiveDateTime {
    NaiveDate::from_ymd_opt(2004, 3, 1)
        .and_then(|d| d.and_hms_opt(0, 0, 0))
        .expect("valid calendar date")
}

/// The four Controlled datasets, named after their optimal interval.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ControlledLevel {
    C30,
    C60,
    C120,
    C240,
}

impl ControlledLevel {
    pub const ALL: [ControlledLevel; 4] = [Self::C30, Self::C60, Self::C120, Self::C240];

    /// Per-30 s change as a fraction of the threshold.
    pub fn fraction_of_tau(self) -> f64 {
        match self {
            Self::C30 => 1.10,
            Self::C60 => 0.475,
            Self::C120 => 0.2375,
            Self::C240 => 0.10,
        }
    }

    pub fn expected_interval(self) -> SamplingInterval {
        match self {
            Self::C30 => SamplingInterval::S30,
            Self::C60 => SamplingInterval::S60,
            Self::C120 => SamplingInterval::S120,
            Self::C240 => SamplingInterval::S240,
        }
    }

    pub fn for_interval(interval: SamplingInterval) -> Self {
        match interval {
            SamplingInterval::S30 => Self::C30,
            SamplingInterval::S60 => Self::C60,
            SamplingInterval::S120 => Self::C120,
            SamplingInterval::S240 => Self::C240,
        }
    }

    /// At 30 s even the shortest interval breaks the threshold, and at 240 s
    /// nothing ever does, so neither says anything about over-threshold rates.
    pub fn counts_toward_over_tau(self) -> bool {
        matches!(self, Self::C60 | Self::C120)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ControlledSpec {
    pub fraction_of_tau: f64,
    pub tau: QualityThreshold,
    /// Seconds covered by the series.
    pub duration: i64,
    pub start_value: f64,
    pub start_timestamp: NaiveDateTime,
}

impl ControlledSpec {
    pub fn new(level: ControlledLevel, duration: i64) -> Self {
        Self {
            fraction_of_tau: level.fraction_of_tau(),
            tau: QualityThreshold::default(),
            duration,
            start_value: DEFAULT_START_VALUE,
            start_timestamp: default_start(),
        }
    }

    pub fn step(&self) -> f64 {
        self.fraction_of_tau * self.tau.value()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EvolvingVariant {
    I,
    II,
    III,
}

impl EvolvingVariant {
    pub const ALL: [EvolvingVariant; 3] = [Self::I, Self::II, Self::III];

    pub fn day_sequence(self) -> [SamplingInterval; 4] {
        use SamplingInterval::*;
        match self {
            Self::I => [S30, S60, S120, S240],
            Self::II => [S240, S120, S60, S30],
            Self::III => [S60, S120, S240, S30],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolvingSpec {
    pub variant: EvolvingVariant,
    pub tau: QualityThreshold,
    pub start_value: f64,
    pub start_timestamp: NaiveDateTime,
}

impl EvolvingSpec {
    pub const DAYS: i64 = 4;

    pub fn new(variant: EvolvingVariant) -> Self {
        Self {
            variant,
            tau: QualityThreshold::default(),
            start_value: DEFAULT_START_VALUE,
            start_timestamp: default_start(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthSegment {
    pub start: i64,
    pub end: i64,
    pub interval: SamplingInterval,
}

/// Piecewise-constant expected interval over `[start, end)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub segments: Vec<TruthSegment>,
}

impl GroundTruth {
    pub fn constant(start: i64, end: i64, interval: SamplingInterval) -> Self {
        Self {
            segments: vec![TruthSegment { start, end, interval }],
        }
    }

    pub fn start(&self) -> i64 {
        self.segments.first().map_or(0, |s| s.start)
    }

    pub fn end(&self) -> i64 {
        self.segments.last().map_or(0, |s| s.end)
    }

    pub fn segment_at(&self, t: i64) -> Result<&TruthSegment> {
        self.segments
            .iter()
            .find(|s| s.start <= t && t < s.end)
            .ok_or(Error::OutOfRange {
                t,
                start: self.start(),
                end: self.end(),
            })
    }

    pub fn expected_interval(&self, t: i64) -> Result<SamplingInterval> {
        self.segment_at(t).map(|s| s.interval)
    }
}

/// Free-function form of [`GroundTruth::expected_interval`].
pub fn expected_interval(truth: &GroundTruth, t: i64) -> Result<SamplingInterval> {
    truth.expected_interval(t)
}

fn triangle(step_index: usize) -> f64 {
    let phase = step_index % (2 * REVERSAL_STEPS);
    let pos = if phase <= REVERSAL_STEPS {
        phase
    } else {
        2 * REVERSAL_STEPS - phase
    };
    pos as f64
}

fn grid_points(duration: i64) -> usize {
    ((duration + GRID_STEP - 1) / GRID_STEP) as usize
}

pub fn generate_controlled(spec: &ControlledSpec) -> Result<SignalSource> {
    if spec.duration <= 0 {
        return Err(Error::InvalidScenario(format!(
            "duration must be positive, got {} s",
            spec.duration
        )));
    }
    if !(spec.fraction_of_tau.is_finite() && spec.fraction_of_tau > 0.0) {
        return Err(Error::InvalidScenario(format!(
            "fraction of tau must be positive, got {}",
            spec.fraction_of_tau
        )));
    }
    let step = spec.step();
    let values = (0..grid_points(spec.duration))
        .map(|j| spec.start_value + step * triangle(j))
        .collect();
    Ok(SignalSource::new(epoch_of(spec.start_timestamp), values))
}

pub fn generate_evolving(spec: &EvolvingSpec) -> Result<(SignalSource, GroundTruth)> {
    let start = epoch_of(spec.start_timestamp);
    let per_day = grid_points(SECONDS_PER_DAY);
    let mut values = Vec::with_capacity(per_day * EvolvingSpec::DAYS as usize);
    let mut segments = Vec::new();
    let mut segment_start_value = spec.start_value;
    for (day, interval) in spec.variant.day_sequence().into_iter().enumerate() {
        let step = ControlledLevel::for_interval(interval).fraction_of_tau() * spec.tau.value();
        // Continue from the value the previous day would have reached next.
        let day_values: Vec<f64> = (0..=per_day)
            .map(|j| segment_start_value + step * triangle(j))
            .collect();
        values.extend_from_slice(&day_values[..per_day]);
        segment_start_value = day_values[per_day];
        let day_start = start + day as i64 * SECONDS_PER_DAY;
        segments.push(TruthSegment {
            start: day_start,
            end: day_start + SECONDS_PER_DAY,
            interval,
        });
    }
    Ok((SignalSource::new(start, values), GroundTruth { segments }))
}
