//! Measurement series on the 30 s base grid.

use chrono::{DateTime, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Spacing of every signal grid, in seconds.
pub const GRID_STEP: i64 = 30;

pub const SECONDS_PER_DAY: i64 = 86_400;

/// A temperature series sampled every [`GRID_STEP`] seconds from `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SignalSource {
    pub node_id: Option<u32>,
    /// Epoch seconds of the first value.
    pub start: i64,
    pub values: Vec<f64>,
}

impl SignalSource {
    pub fn new(start: i64, values: Vec<f64>) -> Self {
        Self {
            node_id: None,
            start,
            values,
        }
    }

    pub fn with_node(mut self, node_id: u32) -> Self {
        self.node_id = Some(node_id);
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Exclusive end of the grid: one step past the last value.
    pub fn end(&self) -> i64 {
        self.start + GRID_STEP * self.values.len() as i64
    }

    pub fn span(&self) -> i64 {
        self.end() - self.start
    }

    pub fn time_at(&self, index: usize) -> i64 {
        self.start + GRID_STEP * index as i64
    }

    pub fn value_at(&self, t: i64) -> Result<f64> {
        let offset = t - self.start;
        if offset % GRID_STEP != 0 {
            return Err(Error::OffGrid { t, start: self.start });
        }
        if offset < 0 || t >= self.end() {
            return Err(Error::OutOfRange {
                t,
                start: self.start,
                end: self.end(),
            });
        }
        Ok(self.values[(offset / GRID_STEP) as usize])
    }

    pub fn iter(&self) -> impl Iterator<Item = (i64, f64)> + '_ {
        self.values
            .iter()
            .enumerate()
            .map(move |(i, v)| (self.time_at(i), *v))
    }
}

pub fn datetime_of(epoch: i64) -> NaiveDateTime {
    DateTime::from_timestamp(epoch, 0)
        .map(|d| d.naive_utc())
        .unwrap_or_default()
}

pub fn epoch_of(dt: NaiveDateTime) -> i64 {
    dt.and_utc().timestamp()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_lookup() {
        let s = SignalSource::new(600, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.end(), 690);
        assert_eq!(s.value_at(630).unwrap(), 2.0);
        assert!(matches!(s.value_at(615), Err(Error::OffGrid { .. })));
        assert!(matches!(s.value_at(690), Err(Error::OutOfRange { .. })));
        assert!(matches!(s.value_at(570), Err(Error::OutOfRange { .. })));
    }
}
