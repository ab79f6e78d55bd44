//! Load and renewable power traces, and the trace CSV format
//! (`timestamp,source_id,kw`, one row per slot per source).

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, Utc};

use crate::error::{Error, Result};

pub const DEFAULT_SLOT_SECONDS: u32 = 300;

/// Uniformly spaced kW samples from one source.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace {
    pub source_id: String,
    /// Slot duration in seconds.
    pub resolution: u32,
    /// Unix time of the first sample.
    pub start: i64,
    pub series: Vec<f64>,
}

impl Trace {
    pub fn new(source_id: impl Into<String>, resolution: u32, series: Vec<f64>) -> Result<Self> {
        let trace = Trace {
            source_id: source_id.into(),
            resolution,
            start: 0,
            series,
        };
        trace.validate()?;
        Ok(trace)
    }

    pub fn with_start(mut self, start: i64) -> Self {
        self.start = start;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.resolution == 0 {
            return Err(Error::InvalidArgument(format!(
                "trace {}: resolution must be positive",
                self.source_id
            )));
        }
        if let Some((i, v)) = self
            .series
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "trace {}: sample {i} is {v}, expected a finite non-negative kW value",
                self.source_id
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.series.len()
    }

    pub fn is_empty(&self) -> bool {
        self.series.is_empty()
    }

    /// Slots per day at this resolution (at least 1).
    pub fn slots_per_day(&self) -> usize {
        (86_400 / self.resolution as usize).max(1)
    }

    /// Sub-trace made of the given whole days, concatenated in order.
    pub fn select_days(&self, days: &[usize]) -> Trace {
        let per_day = self.slots_per_day();
        let mut series = Vec::with_capacity(days.len() * per_day);
        for &d in days {
            let lo = (d * per_day).min(self.series.len());
            let hi = ((d + 1) * per_day).min(self.series.len());
            series.extend_from_slice(&self.series[lo..hi]);
        }
        Trace {
            source_id: self.source_id.clone(),
            resolution: self.resolution,
            start: self.start,
            series,
        }
    }
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

/// Parse trace CSV text. `path` is only used in error messages.
///
/// Rows may come in any order; each source must be uniformly spaced with
/// no missing slots.
pub fn parse_traces(reader: impl Read, path: &Path) -> Result<Vec<Trace>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| parse_error(path, 1, e.to_string()))?
        .clone();
    let expected = ["timestamp", "source_id", "kw"];
    if headers.len() != 3 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(parse_error(
            path,
            1,
            format!("expected header `timestamp,source_id,kw`, got `{}`", headers.iter().collect::<Vec<_>>().join(",")),
        ));
    }
    let mut by_source: BTreeMap<String, Vec<(i64, f64, usize)>> = BTreeMap::new();
    for (i, record) in rdr.records().enumerate() {
        let line = i + 2;
        let record = record.map_err(|e| parse_error(path, line, e.to_string()))?;
        if record.len() != 3 {
            return Err(parse_error(path, line, format!("expected 3 fields, got {}", record.len())));
        }
        let ts = DateTime::parse_from_rfc3339(&record[0])
            .map_err(|e| parse_error(path, line, format!("bad timestamp `{}`: {e}", &record[0])))?
            .with_timezone(&Utc)
            .timestamp();
        let kw: f64 = record[2]
            .parse()
            .map_err(|e| parse_error(path, line, format!("bad kw value `{}`: {e}", &record[2])))?;
        if !kw.is_finite() || kw < 0.0 {
            return Err(parse_error(path, line, format!("kw must be finite and non-negative, got {kw}")));
        }
        by_source.entry(record[1].to_string()).or_default().push((ts, kw, line));
    }
    let mut traces = Vec::with_capacity(by_source.len());
    for (source, mut rows) in by_source {
        rows.sort_by_key(|r| r.0);
        if rows.len() < 2 {
            return Err(parse_error(
                path,
                rows.first().map_or(1, |r| r.2),
                format!("source {source}: need at least two samples to infer slot spacing"),
            ));
        }
        let step = rows[1].0 - rows[0].0;
        if step <= 0 {
            return Err(parse_error(path, rows[1].2, format!("source {source}: duplicate timestamp")));
        }
        for w in rows.windows(2) {
            let gap = w[1].0 - w[0].0;
            if gap != step {
                let msg = if gap == 0 {
                    format!("source {source}: duplicate timestamp")
                } else {
                    format!("source {source}: slot spacing {gap}s differs from {step}s (gaps are rejected)")
                };
                return Err(parse_error(path, w[1].2, msg));
            }
        }
        let resolution = u32::try_from(step)
            .map_err(|_| parse_error(path, rows[1].2, format!("source {source}: slot spacing too large")))?;
        traces.push(Trace {
            source_id: source,
            resolution,
            start: rows[0].0,
            series: rows.iter().map(|r| r.1).collect(),
        });
    }
    Ok(traces)
}

pub fn read_traces(path: &Path) -> Result<Vec<Trace>> {
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_traces(file, path)
}

pub fn write_traces(traces: &[Trace], mut out: impl Write, path: &Path) -> Result<()> {
    let io = |e| Error::io(path, e);
    writeln!(out, "timestamp,source_id,kw").map_err(io)?;
    for t in traces {
        for (i, v) in t.series.iter().enumerate() {
            let ts = t.start + i as i64 * t.resolution as i64;
            let stamp = DateTime::<Utc>::from_timestamp(ts, 0)
                .ok_or_else(|| Error::InvalidArgument(format!("timestamp {ts} out of range")))?;
            writeln!(out, "{},{},{}", stamp.format("%Y-%m-%dT%H:%M:%SZ"), t.source_id, v).map_err(io)?;
        }
    }
    Ok(())
}
