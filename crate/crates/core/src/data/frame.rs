use std::fs::File;
use std::io::Read;
use std::path::Path;

use chrono::{DateTime, NaiveDate, NaiveDateTime};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How timestamps are written in the timestamp column.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum TimestampFormat {
    /// RFC 3339 or one of the common `YYYY-MM-DD[ T]HH:MM[:SS]` layouts.
    Iso8601,
    EpochSeconds,
    /// A chrono `strftime` pattern, interpreted as UTC.
    Pattern(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum ExogenousColumns {
    /// Every column other than the timestamp and the target.
    All,
    Named(Vec<String>),
}

/// Column roles for [`load_csv`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CsvSchema {
    pub timestamp_column: String,
    pub target_column: String,
    pub exogenous: ExogenousColumns,
    pub timestamp_format: TimestampFormat,
    pub delimiter: u8,
}

impl CsvSchema {
    pub fn new(timestamp_column: impl Into<String>, target_column: impl Into<String>) -> Self {
        Self {
            timestamp_column: timestamp_column.into(),
            target_column: target_column.into(),
            exogenous: ExogenousColumns::Named(Vec::new()),
            timestamp_format: TimestampFormat::Iso8601,
            delimiter: b',',
        }
    }

    pub fn with_exogenous(mut self, exogenous: ExogenousColumns) -> Self {
        self.exogenous = exogenous;
        self
    }

    pub fn with_timestamp_format(mut self, format: TimestampFormat) -> Self {
        self.timestamp_format = format;
        self
    }

    pub fn with_delimiter(mut self, delimiter: u8) -> Self {
        self.delimiter = delimiter;
        self
    }
}

/// A validated, strictly time-ordered series with optional exogenous columns.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesFrame {
    /// Seconds since the Unix epoch, UTC.
    pub timestamps: Vec<i64>,
    pub target_name: String,
    pub target: Vec<f64>,
    pub exogenous: Vec<(String, Vec<f64>)>,
    /// Rows discarded at ingestion because a value was missing or non-finite.
    pub dropped_rows: usize,
}

impl TimeSeriesFrame {
    /// Builds a frame from in-memory columns, enforcing the same invariants
    /// as CSV ingestion (rows with non-finite values are dropped).
    pub fn new(
        timestamps: Vec<i64>,
        target_name: impl Into<String>,
        target: Vec<f64>,
        exogenous: Vec<(String, Vec<f64>)>,
    ) -> Result<Self> {
        let n = timestamps.len();
        if target.len() != n {
            return Err(Error::LengthMismatch {
                expected: n,
                got: target.len(),
            });
        }
        for (_, col) in &exogenous {
            if col.len() != n {
                return Err(Error::LengthMismatch {
                    expected: n,
                    got: col.len(),
                });
            }
        }
        let keep: Vec<bool> = (0..n)
            .map(|i| target[i].is_finite() && exogenous.iter().all(|(_, c)| c[i].is_finite()))
            .collect();
        let dropped_rows = keep.iter().filter(|k| !**k).count();
        let filter = |v: &[f64]| -> Vec<f64> {
            v.iter()
                .zip(&keep)
                .filter(|(_, k)| **k)
                .map(|(x, _)| *x)
                .collect()
        };
        let timestamps: Vec<i64> = timestamps
            .iter()
            .zip(&keep)
            .filter(|(_, k)| **k)
            .map(|(t, _)| *t)
            .collect();
        check_monotone(&timestamps)?;
        if timestamps.is_empty() {
            return Err(Error::Empty("time series"));
        }
        Ok(Self {
            timestamps,
            target_name: target_name.into(),
            target: filter(&target),
            exogenous: exogenous
                .iter()
                .map(|(name, c)| (name.clone(), filter(c)))
                .collect(),
            dropped_rows,
        })
    }

    pub fn len(&self) -> usize {
        self.timestamps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps.is_empty()
    }

    pub fn exogenous_names(&self) -> Vec<String> {
        self.exogenous.iter().map(|(n, _)| n.clone()).collect()
    }
}

fn check_monotone(timestamps: &[i64]) -> Result<()> {
    for (i, w) in timestamps.windows(2).enumerate() {
        if w[1] <= w[0] {
            // header is line 1, first record line 2
            return Err(Error::NonMonotoneTimestamps {
                line: i as u64 + 3,
            });
        }
    }
    Ok(())
}

/// Reads a time-series CSV from disk.
pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<TimeSeriesFrame> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

/// Reads a time-series CSV from any reader. Rows with an empty, `NA` or
/// non-finite value are dropped and counted; any other malformed field is an
/// error.
pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<TimeSeriesFrame> {
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(Error::Empty("csv file"));
    }
    let find = |name: &str| -> Result<usize> {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_idx = find(&schema.timestamp_column)?;
    let target_idx = find(&schema.target_column)?;
    let exo: Vec<(String, usize)> = match &schema.exogenous {
        ExogenousColumns::All => headers
            .iter()
            .enumerate()
            .filter(|(i, _)| *i != ts_idx && *i != target_idx)
            .map(|(i, h)| (h.to_string(), i))
            .collect(),
        ExogenousColumns::Named(names) => names
            .iter()
            .map(|n| find(n).map(|i| (n.clone(), i)))
            .collect::<Result<_>>()?,
    };

    let mut timestamps = Vec::new();
    let mut target = Vec::new();
    let mut columns: Vec<Vec<f64>> = vec![Vec::new(); exo.len()];
    let mut dropped = 0usize;
    let mut rows_seen = 0usize;
    let mut last_ts: Option<i64> = None;
    let mut record = csv::StringRecord::new();
    while rdr.read_record(&mut record)? {
        rows_seen += 1;
        let line = record.position().map_or(0, |p| p.line());
        let raw_ts = record.get(ts_idx).unwrap_or("");
        let ts = parse_timestamp(raw_ts, &schema.timestamp_format).ok_or_else(|| {
            Error::InvalidTimestamp {
                line,
                value: raw_ts.to_string(),
            }
        })?;
        let y = parse_value(record.get(target_idx).unwrap_or(""), &schema.target_column, line)?;
        let mut exo_values = Vec::with_capacity(exo.len());
        for (name, idx) in &exo {
            exo_values.push(parse_value(record.get(*idx).unwrap_or(""), name, line)?);
        }
        let (Some(y), Some(exo_values)) = (y, exo_values.into_iter().collect::<Option<Vec<_>>>())
        else {
            dropped += 1;
            continue;
        };
        if let Some(prev) = last_ts {
            if ts <= prev {
                return Err(Error::NonMonotoneTimestamps { line });
            }
        }
        last_ts = Some(ts);
        timestamps.push(ts);
        target.push(y);
        for (col, v) in columns.iter_mut().zip(exo_values) {
            col.push(v);
        }
    }
    if rows_seen == 0 || timestamps.is_empty() {
        return Err(Error::Empty("csv file"));
    }
    Ok(TimeSeriesFrame {
        timestamps,
        target_name: schema.target_column.clone(),
        target,
        exogenous: exo.into_iter().map(|(n, _)| n).zip(columns).collect(),
        dropped_rows: dropped,
    })
}

/// `Ok(None)` marks a missing value.
fn parse_value(field: &str, column: &str, line: u64) -> Result<Option<f64>> {
    if field.is_empty() || matches!(field.to_ascii_lowercase().as_str(), "na" | "nan" | "null") {
        return Ok(None);
    }
    match field.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(Some(v)),
        Ok(_) => Ok(None),
        Err(_) => Err(Error::InvalidNumber {
            line,
            column: column.to_string(),
            value: field.to_string(),
        }),
    }
}

const ISO_LAYOUTS: &[&str] = &[
    "%Y-%m-%dT%H:%M:%S%.f",
    "%Y-%m-%d %H:%M:%S%.f",
    "%Y-%m-%dT%H:%M",
    "%Y-%m-%d %H:%M",
    "%Y%m%d %H:%M",
];

fn parse_timestamp(field: &str, format: &TimestampFormat) -> Option<i64> {
    match format {
        TimestampFormat::EpochSeconds => field
            .parse::<i64>()
            .ok()
            .or_else(|| field.parse::<f64>().ok().filter(|v| v.is_finite()).map(|v| v as i64)),
        TimestampFormat::Pattern(p) => NaiveDateTime::parse_from_str(field, p)
            .ok()
            .map(|t| t.and_utc().timestamp()),
        TimestampFormat::Iso8601 => {
            if let Ok(t) = DateTime::parse_from_rfc3339(field) {
                return Some(t.timestamp());
            }
            for layout in ISO_LAYOUTS {
                if let Ok(t) = NaiveDateTime::parse_from_str(field, layout) {
                    return Some(t.and_utc().timestamp());
                }
            }
            NaiveDate::parse_from_str(field, "%Y-%m-%d")
                .ok()
                .and_then(|d| d.and_hms_opt(0, 0, 0))
                .map(|t| t.and_utc().timestamp())
        }
    }
}
