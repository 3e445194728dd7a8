//! `timestamp,value` CSV files. Missing samples are empty fields.

use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Relative deviation from the inferred step tolerated per row.
pub const STEP_TOLERANCE: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum GapPolicy {
    /// Skipped steps become missing samples.
    #[default]
    Fill,
    /// Skipped steps are an error.
    Reject,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct CsvOptions {
    /// `None` detects a header from the first row.
    #[serde(default)]
    pub has_header: Option<bool>,
    #[serde(default)]
    pub gaps: GapPolicy,
    /// Step in seconds; inferred from the most common spacing when absent.
    #[serde(default)]
    pub step_seconds: Option<u64>,
}

pub fn parse_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<TimeSeries> {
    read_csv(std::fs::File::open(path)?, options)
}

pub fn read_csv<R: Read>(reader: R, options: &CsvOptions) -> Result<TimeSeries> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).flexible(false).from_reader(reader);
    let mut rows: Vec<(usize, i64, Option<f64>)> = Vec::new();
    for (idx, record) in rdr.records().enumerate() {
        let record = record?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        if record.len() != 2 {
            return Err(Error::Parse { line, message: format!("expected 2 columns, found {}", record.len()) });
        }
        let ts_field = record[0].trim();
        let is_header = match options.has_header {
            Some(h) => h && idx == 0,
            None => idx == 0 && ts_field.parse::<i64>().is_err(),
        };
        if is_header {
            continue;
        }
        let ts: i64 = ts_field
            .parse()
            .map_err(|_| Error::Parse { line, message: format!("bad timestamp {ts_field:?}") })?;
        let raw = record[1].trim();
        let value = if raw.is_empty() {
            None
        } else {
            let v: f64 = raw.parse().map_err(|_| Error::Parse { line, message: format!("bad value {raw:?}") })?;
            (!v.is_nan()).then_some(v)
        };
        if let Some(&(prev_line, prev, _)) = rows.last() {
            if ts <= prev {
                return Err(Error::Parse {
                    line,
                    message: format!("timestamp {ts} does not increase after line {prev_line}"),
                });
            }
        }
        rows.push((line, ts, value));
    }
    let step = match options.step_seconds {
        Some(s) if s > 0 => s,
        Some(_) => return Err(Error::Parameter("step_seconds must be positive".into())),
        // an empty file has no step to infer
        None if rows.is_empty() => 1,
        None => infer_step(&rows)?,
    };
    let Some(&(_, start, _)) = rows.first() else {
        return Ok(TimeSeries::new(0, step, vec![]));
    };
    let mut values: Vec<Option<f64>> = Vec::with_capacity(rows.len());
    for &(line, ts, value) in &rows {
        let pos = (ts - start) as f64 / step as f64;
        let idx = pos.round();
        if (pos - idx).abs() > STEP_TOLERANCE {
            return Err(Error::Parse {
                line,
                message: format!("timestamp {ts} is off the {step}s grid starting at {start}"),
            });
        }
        let idx = idx as usize;
        if idx < values.len() {
            return Err(Error::Parse { line, message: format!("timestamp {ts} falls into an occupied slot") });
        }
        if idx > values.len() && options.gaps == GapPolicy::Reject {
            return Err(Error::Parse { line, message: format!("{} missing step(s) before {ts}", idx - values.len()) });
        }
        values.resize(idx, None);
        values.push(value);
    }
    Ok(TimeSeries::new(start, step, values))
}

fn infer_step(rows: &[(usize, i64, Option<f64>)]) -> Result<u64> {
    let mut counts: std::collections::BTreeMap<i64, usize> = Default::default();
    for w in rows.windows(2) {
        *counts.entry(w[1].1 - w[0].1).or_default() += 1;
    }
    // most common spacing, smallest on ties
    counts
        .into_iter()
        .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
        .map(|(d, _)| d as u64)
        .ok_or_else(|| Error::Parse { line: 1, message: "cannot infer a step from fewer than two rows".into() })
}

pub fn write_csv(path: impl AsRef<Path>, series: &TimeSeries) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_csv_to(std::io::BufWriter::new(file), series)
}

/// Writes with a `timestamp,value` header. Values use the shortest
/// representation that parses back to the same `f64`.
pub fn write_csv_to<W: Write>(writer: W, series: &TimeSeries) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "value"])?;
    for (i, v) in series.values.iter().enumerate() {
        let value = v.map(|x| x.to_string()).unwrap_or_default();
        w.write_record([series.timestamp(i).to_string(), value])?;
    }
    w.flush()?;
    Ok(())
}
