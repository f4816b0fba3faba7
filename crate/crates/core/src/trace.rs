//! Real sensor traces: parsing, regridding onto the 30 s grid, and noise.

use std::collections::{BTreeMap, HashSet};
use std::io::{BufRead, Write};

use chrono::{Datelike, NaiveDateTime, Timelike, Weekday};
use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::{datetime_of, epoch_of, SignalSource};

/// A regridded single-node trace.
pub type NodeTrace = SignalSource;

/// Noise added to replayed traces unless configured otherwise, in °C.
pub const DEFAULT_NOISE_SIGMA: f64 = 0.002;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceFormat {
    /// `date time epoch moteid temperature humidity light voltage`, whitespace separated.
    IntelLab,
    /// `timestamp_iso8601,node_id,value_c` with a header row.
    SimpleCsv,
}

impl std::str::FromStr for TraceFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "intel_lab" => Ok(Self::IntelLab),
            "simple_csv" => Ok(Self::SimpleCsv),
            other => Err(Error::Config(format!("unknown trace format '{other}'"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RawRecord {
    pub timestamp: NaiveDateTime,
    pub node_id: u32,
    pub value: f64,
}

impl RawRecord {
    /// Epoch seconds including the fractional part.
    pub fn epoch_seconds(&self) -> f64 {
        epoch_of(self.timestamp) as f64 + f64::from(self.timestamp.nanosecond()) * 1e-9
    }
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SkipReport {
    pub skipped: usize,
    pub reasons: BTreeMap<String, usize>,
}

impl SkipReport {
    fn skip(&mut self, reason: &str) {
        self.skipped += 1;
        *self.reasons.entry(reason.to_string()).or_default() += 1;
    }
}

impl std::fmt::Display for SkipReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let hist: Vec<String> = self.reasons.iter().map(|(k, v)| format!("{k}:{v}")).collect();
        write!(f, "skipped={} reasons={}", self.skipped, hist.join(","))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParsedTrace {
    pub records: Vec<RawRecord>,
    pub report: SkipReport,
}

impl ParsedTrace {
    pub fn node_ids(&self) -> Vec<u32> {
        let mut ids: Vec<u32> = self.records.iter().map(|r| r.node_id).collect();
        ids.dedup();
        ids
    }

    pub fn for_node(&self, node_id: u32) -> Vec<RawRecord> {
        self.records
            .iter()
            .filter(|r| r.node_id == node_id)
            .cloned()
            .collect()
    }
}

fn parse_timestamp(s: &str) -> Option<NaiveDateTime> {
    const FORMATS: [&str; 2] = ["%Y-%m-%dT%H:%M:%S%.f", "%Y-%m-%d %H:%M:%S%.f"];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s.trim(), f).ok())
}

fn parse_value(s: &str) -> Option<f64> {
    s.trim().parse::<f64>().ok().filter(|v| v.is_finite())
}

fn parse_intel_line(line: &str) -> std::result::Result<RawRecord, &'static str> {
    let fields: Vec<&str> = line.split_whitespace().collect();
    if fields.len() < 5 {
        return Err("missing_field");
    }
    let timestamp =
        parse_timestamp(&format!("{} {}", fields[0], fields[1])).ok_or("bad_timestamp")?;
    let node_id = fields[3].parse::<u32>().map_err(|_| "bad_node")?;
    let value = parse_value(fields[4]).ok_or("bad_value")?;
    Ok(RawRecord {
        timestamp,
        node_id,
        value,
    })
}

fn parse_simple_line(line: &str) -> std::result::Result<RawRecord, &'static str> {
    let fields: Vec<&str> = line.split(',').collect();
    if fields.len() < 3 {
        return Err("missing_field");
    }
    let timestamp = parse_timestamp(fields[0]).ok_or("bad_timestamp")?;
    let node_id = fields[1].trim().parse::<u32>().map_err(|_| "bad_node")?;
    let value = parse_value(fields[2]).ok_or("bad_value")?;
    Ok(RawRecord {
        timestamp,
        node_id,
        value,
    })
}

/// Parses a trace, skipping (and counting) unusable lines.
///
/// Records come back sorted by node, then timestamp. A repeated timestamp
/// for the same node keeps the first occurrence.
pub fn parse_records<R: BufRead>(input: R, format: TraceFormat) -> Result<ParsedTrace> {
    let mut report = SkipReport::default();
    let mut records = Vec::new();
    for (lineno, line) in input.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        if format == TraceFormat::SimpleCsv && lineno == 0 && trimmed.starts_with("timestamp") {
            continue;
        }
        let parsed = match format {
            TraceFormat::IntelLab => parse_intel_line(trimmed),
            TraceFormat::SimpleCsv => parse_simple_line(trimmed),
        };
        match parsed {
            Ok(r) => records.push(r),
            Err(reason) => {
                log::debug!("line {}: {reason}", lineno + 1);
                report.skip(reason);
            }
        }
    }

    records.sort_by_key(|r| (r.node_id, r.timestamp));
    let mut seen = HashSet::new();
    records.retain(|r| {
        let fresh = seen.insert((r.node_id, r.timestamp));
        if !fresh {
            log::debug!("duplicate timestamp {} for node {}", r.timestamp, r.node_id);
            report.skip("duplicate_timestamp");
        }
        fresh
    });

    if records.is_empty() {
        return Err(Error::NoRecords {
            skipped: report.skipped,
        });
    }
    Ok(ParsedTrace { records, report })
}

/// Writes records in the `simple_csv` layout, header included.
pub fn write_simple_csv<W: Write>(out: W, records: &[RawRecord]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["timestamp_iso8601", "node_id", "value_c"])?;
    for r in records {
        w.write_record([
            r.timestamp.format("%Y-%m-%dT%H:%M:%S%.f").to_string(),
            r.node_id.to_string(),
            r.value.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Records for every grid point of `trace`.
pub fn trace_records(trace: &NodeTrace) -> Vec<RawRecord> {
    let node_id = trace.node_id.unwrap_or(0);
    trace
        .iter()
        .map(|(t, value)| RawRecord {
            timestamp: datetime_of(t),
            node_id,
            value,
        })
        .collect()
}

/// Linearly interpolates one node's records onto a `grid_step` grid.
///
/// The grid starts at the first timestamp rounded down to a multiple of
/// `grid_step` and ends at the last grid point not after the final record.
pub fn regrid(records: &[RawRecord], grid_step: i64) -> Result<NodeTrace> {
    let insufficient = || Error::InsufficientRecords {
        count: records.len(),
        step: grid_step,
    };
    if records.len() < 2 || grid_step <= 0 {
        return Err(insufficient());
    }
    let times: Vec<f64> = records.iter().map(RawRecord::epoch_seconds).collect();
    let first = times[0];
    let last = times[times.len() - 1];
    if last - first <= grid_step as f64 {
        return Err(insufficient());
    }
    let anchor = (first.floor() as i64).div_euclid(grid_step) * grid_step;
    let points = ((last - anchor as f64) / grid_step as f64).floor() as usize + 1;

    let mut values = Vec::with_capacity(points);
    let mut seg = 0;
    for k in 0..points {
        let t = (anchor + k as i64 * grid_step) as f64;
        while seg + 2 < times.len() && times[seg + 1] < t {
            seg += 1;
        }
        let (t0, t1) = (times[seg], times[seg + 1]);
        let (v0, v1) = (records[seg].value, records[seg + 1].value);
        let v = if t <= t0 {
            v0
        } else if t >= t1 {
            v1
        } else if t1 > t0 {
            v0 + (v1 - v0) * ((t - t0) / (t1 - t0))
        } else {
            v0
        };
        values.push(v);
    }

    let mut trace = SignalSource::new(anchor, values);
    trace.node_id = Some(records[0].node_id);
    Ok(trace)
}

/// Adds independent zero-mean Gaussian noise with standard deviation `sigma`.
pub fn add_noise<R: Rng + ?Sized>(trace: &NodeTrace, sigma: f64, rng: &mut R) -> Result<NodeTrace> {
    if !(sigma.is_finite() && sigma >= 0.0) {
        return Err(Error::InvalidParameter {
            name: "noise_sigma",
            value: sigma,
        });
    }
    let mut out = trace.clone();
    if sigma == 0.0 {
        return Ok(out);
    }
    let normal = Normal::new(0.0, sigma).map_err(|_| Error::InvalidParameter {
        name: "noise_sigma",
        value: sigma,
    })?;
    for v in &mut out.values {
        *v += normal.sample(rng);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TimestampContext {
    pub hour: u32,
    pub day_of_week: Weekday,
    pub is_weekend: bool,
    pub is_working_hour: bool,
}

pub fn context_of(timestamp: NaiveDateTime) -> TimestampContext {
    let hour = timestamp.hour();
    let day_of_week = timestamp.weekday();
    TimestampContext {
        hour,
        day_of_week,
        is_weekend: matches!(day_of_week, Weekday::Sat | Weekday::Sun),
        is_working_hour: (7..=18).contains(&hour),
    }
}

pub fn context_of_epoch(epoch: i64) -> TimestampContext {
    context_of(datetime_of(epoch))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::GRID_STEP;
    use chrono::NaiveDate;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn at(secs: i64, value: f64) -> RawRecord {
        RawRecord {
            timestamp: datetime_of(1_078_099_200 + secs),
            node_id: 1,
            value,
        }
    }

    #[test]
    fn intel_line() {
        let input = "2004-03-01 00:00:30.5 1 17 22.15 40.1 45 2.69\n";
        let parsed = parse_records(input.as_bytes(), TraceFormat::IntelLab).unwrap();
        assert_eq!(parsed.records.len(), 1);
        let r = &parsed.records[0];
        assert_eq!(r.node_id, 17);
        assert_eq!(r.value, 22.15);
        assert_eq!(
            r.timestamp,
            NaiveDate::from_ymd_opt(2004, 3, 1)
                .unwrap()
                .and_hms_milli_opt(0, 0, 30, 500)
                .unwrap()
        );
    }

    #[test]
    fn simple_line_and_skips() {
        let input = "timestamp_iso8601,node_id,value_c\n\
                     2004-03-01T00:00:30,5,21.90\n\
                     2004-03-01T00:01:00,5,abc\n\
                     2004-03-01T00:01:30,5\n";
        let parsed = parse_records(input.as_bytes(), TraceFormat::SimpleCsv).unwrap();
        assert_eq!(parsed.records.len(), 1);
        assert_eq!(parsed.records[0].node_id, 5);
        assert_eq!(parsed.records[0].value, 21.90);
        assert_eq!(parsed.report.skipped, 2);
        assert_eq!(parsed.report.reasons["bad_value"], 1);
        assert_eq!(parsed.report.to_string(), "skipped=2 reasons=bad_value:1,missing_field:1");
    }

    #[test]
    fn intel_skips_missing_temperature() {
        let input = "2004-03-01 00:00:30 1 17\n2004-03-01 00:01:00 2 17 nan 1 1 1\n";
        let err = parse_records(input.as_bytes(), TraceFormat::IntelLab).unwrap_err();
        assert!(matches!(err, Error::NoRecords { skipped: 2 }));
    }

    #[test]
    fn duplicates_keep_first_and_sort() {
        let input = "2004-03-01T00:01:00,1,2.0\n\
                     2004-03-01T00:00:00,1,1.0\n\
                     2004-03-01T00:01:00,1,9.0\n\
                     2004-03-01T00:00:00,0,5.0\n";
        let parsed = parse_records(input.as_bytes(), TraceFormat::SimpleCsv).unwrap();
        let vals: Vec<(u32, f64)> = parsed.records.iter().map(|r| (r.node_id, r.value)).collect();
        assert_eq!(vals, vec![(0, 5.0), (1, 1.0), (1, 2.0)]);
        assert_eq!(parsed.node_ids(), vec![0, 1]);
    }

    #[test]
    fn regrid_midpoint() {
        let t = regrid(&[at(0, 20.0), at(60, 20.2)], GRID_STEP).unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.values[0], 20.0);
        assert!((t.values[1] - 20.1).abs() < 1e-12);
        assert_eq!(t.values[2], 20.2);
    }

    #[test]
    fn regrid_on_grid_identity_and_gap() {
        let recs: Vec<RawRecord> = (0..5).map(|k| at(30 * k, 18.0 + k as f64 * 0.37)).collect();
        let t = regrid(&recs, GRID_STEP).unwrap();
        let original: Vec<f64> = recs.iter().map(|r| r.value).collect();
        assert_eq!(t.values, original);

        let t = regrid(&[at(0, 10.0), at(600, 12.0)], GRID_STEP).unwrap();
        assert_eq!(t.len(), 21);
        for (k, v) in t.values.iter().enumerate() {
            assert!((v - (10.0 + 2.0 * k as f64 / 20.0)).abs() < 1e-12);
        }
    }

    #[test]
    fn regrid_anchor_rounds_down() {
        let t = regrid(&[at(45, 1.0), at(165, 2.0)], GRID_STEP).unwrap();
        assert_eq!(t.start, 1_078_099_200 + 30);
        // anchor precedes the first record: value held
        assert_eq!(t.values[0], 1.0);
        assert_eq!(t.len(), 5);
        assert!((t.values[1] - 1.125).abs() < 1e-12);
    }

    #[test]
    fn regrid_needs_two_records() {
        assert!(regrid(&[at(0, 1.0)], GRID_STEP).is_err());
        assert!(regrid(&[at(0, 1.0), at(30, 1.0)], GRID_STEP).is_err());
    }

    #[test]
    fn noise_identity_and_determinism() {
        let t = SignalSource::new(0, vec![20.0; 1000]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(add_noise(&t, 0.0, &mut rng).unwrap(), t);
        let a = add_noise(&t, 0.01, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        let b = add_noise(&t, 0.01, &mut ChaCha8Rng::seed_from_u64(9)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, t);
        assert!(add_noise(&t, -1.0, &mut rng).is_err());
    }

    #[test]
    fn noise_standard_deviation() {
        let n = 100_000;
        let t = SignalSource::new(0, vec![0.0; n]);
        let noisy = add_noise(&t, 0.002, &mut ChaCha8Rng::seed_from_u64(42)).unwrap();
        let mean = noisy.values.iter().sum::<f64>() / n as f64;
        let var = noisy.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        let sd = var.sqrt();
        assert!((sd - 0.002).abs() <= 0.002 * 0.05, "sd {sd}");
    }

    #[test]
    fn working_hours_and_weekend() {
        let day = |d: u32, h: u32| {
            NaiveDate::from_ymd_opt(2004, 3, d)
                .unwrap()
                .and_hms_opt(h, 0, 0)
                .unwrap()
        };
        // 2004-03-02 is a Tuesday, 2004-03-06 a Saturday.
        assert!(context_of(day(2, 7)).is_working_hour);
        assert!(context_of(day(2, 18)).is_working_hour);
        assert!(!context_of(day(2, 19)).is_working_hour);
        assert!(!context_of(day(2, 6)).is_working_hour);
        let sat = context_of(day(6, 10));
        assert!(sat.is_weekend && sat.is_working_hour);
        assert_eq!(sat.day_of_week, Weekday::Sat);
        assert!(!context_of(day(2, 10)).is_weekend);
    }
}
