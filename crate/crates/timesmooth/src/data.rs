//! Hourly load-series ingestion, monthly partitioning, and synthetic
//! concept-drift generation.
//!
//! The CSV dialect is the hourly-load competition format: comma-separated
//! with a header row naming a timestamp column (`TIMESTAMP`), the load
//! column (`LOAD`), and any number of station-temperature columns; a
//! `ZONEID` column is ignored. Timestamps are accepted as ISO-8601
//! (`2005-01-01 01:00:00`, `T` separator or missing seconds allowed) or as
//! `YYYYMMDD H` with the hour in 1..=24 mapped to the hour *beginning* at
//! `H - 1`. Rows whose load cell is empty or unparseable are kept and
//! flagged missing; downstream feature windows skip over them.

use std::path::Path;

use chrono::{Datelike, Months, NaiveDate, NaiveDateTime, TimeDelta, Timelike};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seeding;

/// One hour of data: timestamp, load (None when missing), and station
/// temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct HourlyRecord {
    pub timestamp: NaiveDateTime,
    pub load: Option<f64>,
    pub temps: Vec<f64>,
}

/// A parsed series plus its missing-load count.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedSeries {
    pub records: Vec<HourlyRecord>,
    pub missing: usize,
}

/// One calendar month of contiguous records.
#[derive(Debug, Clone, PartialEq)]
pub struct MonthChunk {
    pub year: i32,
    pub month: u32,
    pub records: Vec<HourlyRecord>,
}

fn parse_timestamp(s: &str, line: usize) -> Result<NaiveDateTime> {
    let s = s.trim();
    for fmt in ["%Y-%m-%d %H:%M:%S", "%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M", "%Y-%m-%dT%H:%M"] {
        if let Ok(t) = NaiveDateTime::parse_from_str(s, fmt) {
            return Ok(t);
        }
    }
    // Competition format: `YYYYMMDD H`, hour-of-day 1..=24, hour-beginning.
    let mut parts = s.split_whitespace();
    if let (Some(date), Some(hour), None) = (parts.next(), parts.next(), parts.next()) {
        if let (Ok(date), Ok(hour)) = (NaiveDate::parse_from_str(date, "%Y%m%d"), hour.parse::<u32>()) {
            if (1..=24).contains(&hour) {
                return Ok(date.and_hms_opt(hour - 1, 0, 0).unwrap());
            }
        }
    }
    Err(Error::Format { line, message: format!("unrecognized timestamp {s:?}") })
}

/// Parse an hourly-load CSV. Timestamps must be strictly increasing; the
/// first offending row is reported by line number.
pub fn load_gefcom_csv(path: impl AsRef<Path>) -> Result<LoadedSeries> {
    let file = std::fs::File::open(path.as_ref())?;
    read_series_csv(file)
}

/// [`load_gefcom_csv`] over any reader.
pub fn read_series_csv(input: impl std::io::Read) -> Result<LoadedSeries> {
    let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(input);
    let headers = reader
        .headers()
        .map_err(|e| Error::Format { line: 1, message: format!("unreadable header: {e}") })?
        .clone();

    let find = |name: &str| headers.iter().position(|h| h.trim().eq_ignore_ascii_case(name));
    let ts_col = find("timestamp")
        .ok_or_else(|| Error::Format { line: 1, message: "header has no TIMESTAMP column".into() })?;
    let load_col = find("load")
        .ok_or_else(|| Error::Format { line: 1, message: "header has no LOAD column".into() })?;
    let zone_col = find("zoneid");
    let temp_cols: Vec<usize> = (0..headers.len())
        .filter(|&i| i != ts_col && i != load_col && Some(i) != zone_col)
        .collect();

    let mut records = Vec::new();
    let mut missing = 0usize;
    for (idx, row) in reader.records().enumerate() {
        let line = idx + 2;
        let row = row.map_err(|e| Error::Format { line, message: e.to_string() })?;
        let timestamp = parse_timestamp(
            row.get(ts_col).ok_or_else(|| Error::Format { line, message: "row too short".into() })?,
            line,
        )?;
        if let Some(prev) = records.last().map(|r: &HourlyRecord| r.timestamp) {
            if timestamp <= prev {
                return Err(Error::Data(format!(
                    "timestamps must increase: line {line} has {timestamp} after {prev}"
                )));
            }
        }
        let load = match row.get(load_col).map(str::trim) {
            Some(cell) if !cell.is_empty() => match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => Some(v),
                _ => None,
            },
            _ => None,
        };
        if load.is_none() {
            missing += 1;
        }
        let temps: Vec<f64> = temp_cols
            .iter()
            .map(|&c| row.get(c).and_then(|s| s.trim().parse::<f64>().ok()).unwrap_or(f64::NAN))
            .collect();
        records.push(HourlyRecord { timestamp, load, temps });
    }
    Ok(LoadedSeries { records, missing })
}

/// Write a series in the canonical dialect: `timestamp,load,t01..tNN`, ISO
/// timestamps, empty cell for a missing load. Re-parsing reproduces the
/// records exactly.
pub fn write_series_csv(records: &[HourlyRecord], out: impl std::io::Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let n_temps = records.first().map_or(0, |r| r.temps.len());
    let mut header = vec!["timestamp".to_string(), "load".to_string()];
    header.extend((1..=n_temps).map(|i| format!("t{i:02}")));
    w.write_record(&header).map_err(|e| Error::Data(e.to_string()))?;
    for r in records {
        let mut row = vec![
            r.timestamp.format("%Y-%m-%d %H:%M:%S").to_string(),
            r.load.map_or(String::new(), |v| format!("{v:.17e}")),
        ];
        row.extend(r.temps.iter().map(|v| format!("{v:.17e}")));
        w.write_record(&row).map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn month_start(ts: NaiveDateTime) -> NaiveDate {
    NaiveDate::from_ymd_opt(ts.year(), ts.month(), 1).unwrap()
}

/// Partition `records` into calendar-month chunks from `start` (year,
/// month) onward, in chronological order. Records before `start` are
/// skipped; an hourly gap anywhere in the emitted range is a data error.
/// A start beyond the series end yields an empty sequence.
pub fn monthly_stream(records: &[HourlyRecord], start_year: i32, start_month: u32) -> Result<Vec<MonthChunk>> {
    let start = NaiveDate::from_ymd_opt(start_year, start_month, 1)
        .ok_or_else(|| Error::Config(format!("invalid start month {start_year}-{start_month}")))?
        .and_hms_opt(0, 0, 0)
        .unwrap();

    let mut chunks: Vec<MonthChunk> = Vec::new();
    let mut prev: Option<NaiveDateTime> = None;
    for r in records.iter().filter(|r| r.timestamp >= start) {
        if let Some(p) = prev {
            if r.timestamp - p != TimeDelta::hours(1) {
                return Err(Error::Data(format!("hourly gap between {p} and {}", r.timestamp)));
            }
        }
        prev = Some(r.timestamp);
        let (y, m) = (r.timestamp.year(), r.timestamp.month());
        match chunks.last_mut() {
            Some(c) if c.year == y && c.month == m => c.records.push(r.clone()),
            _ => chunks.push(MonthChunk { year: y, month: m, records: vec![r.clone()] }),
        }
    }
    Ok(chunks)
}

/// Split a series at `boundary`: everything strictly before it trains,
/// everything from it on tests. The boundary must lie within the series
/// span (an empty training side is allowed; an empty test side is not).
pub fn protocol_split(
    records: &[HourlyRecord],
    boundary: NaiveDateTime,
) -> Result<(&[HourlyRecord], &[HourlyRecord])> {
    let (first, last) = match (records.first(), records.last()) {
        (Some(f), Some(l)) => (f.timestamp, l.timestamp),
        _ => return Err(Error::Config("cannot split an empty series".into())),
    };
    if boundary < first || boundary > last {
        return Err(Error::Config(format!(
            "split boundary {boundary} outside series span {first}..{last}"
        )));
    }
    let idx = records.partition_point(|r| r.timestamp < boundary);
    Ok(records.split_at(idx))
}

/// Boundary placed `test_months` calendar months before the end of the
/// series (aligned to a month start), so the test side is exactly the last
/// `test_months` months.
pub fn boundary_before_end(records: &[HourlyRecord], test_months: u32) -> Result<NaiveDateTime> {
    let last = records.last().ok_or_else(|| Error::Config("empty series".into()))?.timestamp;
    let first = records.first().unwrap().timestamp;
    let end_exclusive = month_start(last)
        .checked_add_months(Months::new(1))
        .ok_or_else(|| Error::Config("series end out of calendar range".into()))?;
    let boundary = end_exclusive
        .checked_sub_months(Months::new(test_months))
        .ok_or_else(|| Error::Config("test span out of calendar range".into()))?
        .and_hms_opt(0, 0, 0)
        .unwrap();
    if boundary < month_start(first).and_hms_opt(0, 0, 0).unwrap() {
        return Err(Error::Config(format!(
            "test span of {test_months} months exceeds the series ({first}..{last})"
        )));
    }
    Ok(boundary)
}

/// A step change applied from `month` (0-based index from the series start)
/// onward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Changepoint {
    pub month: u32,
    pub shift: f64,
}

/// Recipe for a synthetic hourly demand series with concept drift: daily and
/// weekly seasonality, a linear trend per month, level-shift changepoints,
/// and Gaussian noise. Reproducible from the embedded seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DriftSpec {
    pub base: f64,
    pub daily_amplitude: f64,
    pub weekly_amplitude: f64,
    pub trend_per_month: f64,
    pub changepoints: Vec<Changepoint>,
    pub noise_std: f64,
    pub seed: u64,
}

impl Default for DriftSpec {
    fn default() -> Self {
        Self {
            base: 100.0,
            daily_amplitude: 20.0,
            weekly_amplitude: 10.0,
            trend_per_month: 2.0,
            changepoints: vec![Changepoint { month: 12, shift: 30.0 }],
            noise_std: 3.0,
            seed: 0,
        }
    }
}

impl DriftSpec {
    fn validate(&self) -> Result<()> {
        if self.daily_amplitude < 0.0 || self.weekly_amplitude < 0.0 || self.noise_std < 0.0 {
            return Err(Error::Config("amplitudes and noise must be nonnegative".into()));
        }
        Ok(())
    }
}

const SYNTH_TEMP_STATIONS: usize = 25;
const HOURS_PER_YEAR: f64 = 8760.0;

/// Generate `months` calendar months of hourly records starting 2005-01-01:
/// `load = base + daily sin + weekly sin + trend * month + changepoint
/// shifts + N(0, noise^2)`, temperatures as annual sinusoids correlated
/// across stations.
pub fn synth_drift_demand(spec: &DriftSpec, months: u32) -> Result<Vec<HourlyRecord>> {
    if months < 2 {
        return Err(Error::Config(format!("need at least 2 months of synthetic data, got {months}")));
    }
    spec.validate()?;
    let start = NaiveDate::from_ymd_opt(2005, 1, 1).unwrap();
    let end = start
        .checked_add_months(Months::new(months))
        .ok_or_else(|| Error::Config("synthetic span out of calendar range".into()))?;

    let mut rng = seeding::rng_for(spec.seed, 0xd47a);
    let mut records = Vec::new();
    let mut ts = start.and_hms_opt(0, 0, 0).unwrap();
    let end = end.and_hms_opt(0, 0, 0).unwrap();
    let mut hour_index = 0u64;
    while ts < end {
        let month_index = (ts.year() - start.year()) as u32 * 12 + ts.month() - 1;
        let hour = ts.hour() as f64;
        let week_hour = ts.weekday().num_days_from_monday() as f64 * 24.0 + hour;
        let mut load = spec.base
            + spec.daily_amplitude * (std::f64::consts::TAU * hour / 24.0).sin()
            + spec.weekly_amplitude * (std::f64::consts::TAU * week_hour / 168.0).sin()
            + spec.trend_per_month * month_index as f64;
        for cp in &spec.changepoints {
            if month_index >= cp.month {
                load += cp.shift;
            }
        }
        if spec.noise_std > 0.0 {
            let z: f64 = StandardNormal.sample(&mut rng);
            load += spec.noise_std * z;
        }

        let annual = std::f64::consts::TAU * hour_index as f64 / HOURS_PER_YEAR;
        let temps = (0..SYNTH_TEMP_STATIONS)
            .map(|j| 15.0 + 10.0 * (annual + 0.25 * j as f64).sin() + 2.0 * (std::f64::consts::TAU * hour / 24.0).sin())
            .collect();

        records.push(HourlyRecord { timestamp: ts, load: Some(load), temps });
        ts += TimeDelta::hours(1);
        hour_index += 1;
    }
    Ok(records)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn sample_csv() -> String {
        let mut s = String::from("ZONEID,TIMESTAMP,LOAD,w1,w2\n");
        for h in 1..=24 {
            s.push_str(&format!("1,20050101 {h},{},10.5,{}\n", 100 + h, 20 + h));
        }
        s
    }

    #[test]
    fn parses_wellformed_competition_file() {
        let parsed = read_series_csv(sample_csv().as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 24);
        assert_eq!(parsed.missing, 0);
        // Hour 1 means the hour beginning at 00:00.
        assert_eq!(
            parsed.records[0].timestamp,
            NaiveDate::from_ymd_opt(2005, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap()
        );
        assert_eq!(parsed.records[23].timestamp.hour(), 23);
        assert_eq!(parsed.records[0].load, Some(101.0));
        assert_eq!(parsed.records[0].temps, vec![10.5, 21.0]);
    }

    #[test]
    fn parses_fixture_file_from_disk() {
        let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/data/sample_gefcom.csv");
        let parsed = load_gefcom_csv(path).unwrap();
        assert_eq!(parsed.records.len(), 24);
        assert_eq!(parsed.missing, 0);
        assert_eq!(parsed.records[0].load, Some(101.2));
        assert_eq!(parsed.records[0].temps.len(), 3);
    }

    #[test]
    fn iso_timestamps_accepted() {
        let csv = "timestamp,load\n2005-01-01 00:00:00,1.0\n2005-01-01T01:00:00,2.0\n2005-01-01 02:00,3.0\n";
        let parsed = read_series_csv(csv.as_bytes()).unwrap();
        assert_eq!(parsed.records.len(), 3);
    }

    #[test]
    fn empty_load_is_flagged_missing() {
        let csv = "TIMESTAMP,LOAD\n20050101 1,100\n20050101 2,\n20050101 3,abc\n";
        let parsed = read_series_csv(csv.as_bytes()).unwrap();
        assert_eq!(parsed.missing, 2);
        assert_eq!(parsed.records[1].load, None);
        assert_eq!(parsed.records[2].load, None);
    }

    #[test]
    fn shuffled_rows_are_rejected_with_line() {
        let csv = "TIMESTAMP,LOAD\n20050101 2,1\n20050101 1,2\n";
        match read_series_csv(csv.as_bytes()) {
            Err(Error::Data(msg)) => assert!(msg.contains("line 3"), "{msg}"),
            other => panic!("expected data error, got {other:?}"),
        }
    }

    #[test]
    fn missing_header_columns_are_format_errors() {
        let csv = "time,value\n1,2\n";
        assert!(matches!(read_series_csv(csv.as_bytes()), Err(Error::Format { line: 1, .. })));
    }

    #[test]
    fn ingestion_round_trips() {
        let spec = DriftSpec { noise_std: 1.0, ..DriftSpec::default() };
        let mut records = synth_drift_demand(&spec, 2).unwrap();
        records[5].load = None; // exercise the missing-cell path
        let mut buf = Vec::new();
        write_series_csv(&records, &mut buf).unwrap();
        let back = read_series_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records, records);
        assert_eq!(back.missing, 1);
    }

    #[test]
    fn monthly_chunks_have_calendar_sizes() {
        let spec = DriftSpec { noise_std: 0.0, ..DriftSpec::default() };
        let records = synth_drift_demand(&spec, 3).unwrap();
        let chunks = monthly_stream(&records, 2005, 1).unwrap();
        let sizes: Vec<usize> = chunks.iter().map(|c| c.records.len()).collect();
        assert_eq!(sizes, vec![31 * 24, 28 * 24, 31 * 24]);
    }

    #[test]
    fn monthly_stream_edge_cases() {
        let spec = DriftSpec::default();
        let records = synth_drift_demand(&spec, 2).unwrap();
        // Start beyond the end: empty.
        assert!(monthly_stream(&records, 2010, 1).unwrap().is_empty());
        // Single month from the second month on.
        let chunks = monthly_stream(&records, 2005, 2).unwrap();
        assert_eq!(chunks.len(), 1);
        assert_eq!((chunks[0].year, chunks[0].month), (2005, 2));
    }

    #[test]
    fn monthly_stream_detects_gaps() {
        let spec = DriftSpec::default();
        let mut records = synth_drift_demand(&spec, 2).unwrap();
        records.remove(100);
        assert!(matches!(monthly_stream(&records, 2005, 1), Err(Error::Data(_))));
    }

    #[test]
    fn partition_property_reassembles_series() {
        let records = synth_drift_demand(&DriftSpec::default(), 4).unwrap();
        let chunks = monthly_stream(&records, 2005, 1).unwrap();
        let glued: Vec<HourlyRecord> = chunks.into_iter().flat_map(|c| c.records).collect();
        assert_eq!(glued, records);
    }

    #[test]
    fn protocol_split_is_disjoint_and_aligned() {
        let records = synth_drift_demand(&DriftSpec::default(), 6).unwrap();
        let boundary = boundary_before_end(&records, 2).unwrap();
        assert_eq!(boundary, NaiveDate::from_ymd_opt(2005, 5, 1).unwrap().and_hms_opt(0, 0, 0).unwrap());
        let (train, test) = protocol_split(&records, boundary).unwrap();
        assert_eq!(train.len() + test.len(), records.len());
        assert!(train.iter().all(|r| r.timestamp < boundary));
        assert!(test.iter().all(|r| r.timestamp >= boundary));
        assert_eq!(monthly_stream(test, 2005, 5).unwrap().len(), 2);
        // Train ends exactly one hour before the boundary.
        assert_eq!(train.last().unwrap().timestamp, boundary - TimeDelta::hours(1));
    }

    #[test]
    fn protocol_split_rejects_out_of_span() {
        let records = synth_drift_demand(&DriftSpec::default(), 2).unwrap();
        assert!(matches!(boundary_before_end(&records, 60), Err(Error::Config(_))));
        let far = NaiveDate::from_ymd_opt(2020, 1, 1).unwrap().and_hms_opt(0, 0, 0).unwrap();
        assert!(matches!(protocol_split(&records, far), Err(Error::Config(_))));
    }

    #[test]
    fn noiseless_series_is_weekly_periodic() {
        let spec = DriftSpec {
            trend_per_month: 0.0,
            changepoints: vec![],
            noise_std: 0.0,
            ..DriftSpec::default()
        };
        let records = synth_drift_demand(&spec, 3).unwrap();
        for (i, r) in records.iter().enumerate().skip(168) {
            assert_abs_diff_eq!(
                r.load.unwrap(),
                records[i - 168].load.unwrap(),
                epsilon = 1e-9
            );
        }
    }

    #[test]
    fn trend_moves_monthly_means() {
        let spec = DriftSpec {
            trend_per_month: 10.0,
            weekly_amplitude: 0.0,
            changepoints: vec![],
            noise_std: 0.0,
            ..DriftSpec::default()
        };
        let records = synth_drift_demand(&spec, 3).unwrap();
        let chunks = monthly_stream(&records, 2005, 1).unwrap();
        let mean = |c: &MonthChunk| {
            c.records.iter().map(|r| r.load.unwrap()).sum::<f64>() / c.records.len() as f64
        };
        // Whole days make the daily sinusoid average out exactly.
        assert_abs_diff_eq!(mean(&chunks[1]) - mean(&chunks[0]), 10.0, epsilon = 1e-9);
        assert_abs_diff_eq!(mean(&chunks[2]) - mean(&chunks[1]), 10.0, epsilon = 1e-9);
    }

    #[test]
    fn changepoint_shift_is_recovered() {
        let shift = 25.0;
        let spec = DriftSpec {
            trend_per_month: 0.0,
            weekly_amplitude: 0.0,
            changepoints: vec![Changepoint { month: 2, shift }],
            noise_std: 2.0,
            seed: 3,
            ..DriftSpec::default()
        };
        let records = synth_drift_demand(&spec, 4).unwrap();
        let chunks = monthly_stream(&records, 2005, 1).unwrap();
        let mean = |c: &MonthChunk| {
            c.records.iter().map(|r| r.load.unwrap()).sum::<f64>() / c.records.len() as f64
        };
        let n = chunks[1].records.len() as f64;
        let tol = 3.0 * spec.noise_std / n.sqrt() * 2.0;
        assert!(
            (mean(&chunks[2]) - mean(&chunks[1]) - shift).abs() <= tol,
            "observed {} vs shift {shift}",
            mean(&chunks[2]) - mean(&chunks[1])
        );
    }

    #[test]
    fn synthetic_generation_is_deterministic() {
        let spec = DriftSpec::default();
        assert_eq!(synth_drift_demand(&spec, 3).unwrap(), synth_drift_demand(&spec, 3).unwrap());
    }

    #[test]
    fn synthetic_rejects_short_spans() {
        assert!(matches!(synth_drift_demand(&DriftSpec::default(), 1), Err(Error::Config(_))));
    }

    #[test]
    fn drift_spec_round_trips_as_json() {
        let spec = DriftSpec::default();
        let text = serde_json::to_string_pretty(&spec).unwrap();
        let back: DriftSpec = serde_json::from_str(&text).unwrap();
        assert_eq!(spec, back);
    }

    proptest! {
        /// Chunks emitted by the monthly stream partition the tail of the
        /// series: no gaps, no overlaps, chronological.
        #[test]
        fn chunks_are_chronological_and_single_month(months in 2u32..6, start_month in 1u32..4) {
            let spec = DriftSpec { noise_std: 0.0, ..DriftSpec::default() };
            let records = synth_drift_demand(&spec, months).unwrap();
            let chunks = monthly_stream(&records, 2005, start_month).unwrap();
            for c in &chunks {
                prop_assert!(c.records.iter().all(|r| r.timestamp.month() == c.month));
            }
            for pair in chunks.windows(2) {
                let a = (pair[0].year, pair[0].month);
                let b = (pair[1].year, pair[1].month);
                prop_assert!(a < b);
            }
        }
    }
}
