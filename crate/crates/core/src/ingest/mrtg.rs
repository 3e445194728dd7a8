//! MRTG `.log` files.
//!
//! The first line holds the current counters (`timestamp in out`); every
//! following line is `timestamp avg_in avg_out max_in max_out`, newest first.
//! MRTG keeps 5-minute samples for the most recent rows, then 30-minute,
//! 2-hour and daily averages. Rows are assigned to a band by their spacing to
//! neighbouring rows. A row's timestamp marks the end of the interval it
//! averages.

use std::path::Path;

use crate::error::{Error, Result};
use crate::series::{AggregationMode, TimeSeries};

/// Band steps MRTG writes, finest first.
pub const MRTG_BAND_STEPS: [u64; 4] = [300, 1800, 7200, 86_400];

/// Relative tolerance on row spacing when assigning bands.
pub const SPACING_TOLERANCE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct MrtgBand {
    pub step_seconds: u64,
    pub incoming: TimeSeries,
    pub outgoing: TimeSeries,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MrtgLog {
    /// `(timestamp, in counter, out counter)` from the first line.
    pub header: Option<(i64, f64, f64)>,
    /// Bands present in the file, finest first.
    pub bands: Vec<MrtgBand>,
}

/// Traffic direction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    #[default]
    In,
    Out,
}

impl MrtgLog {
    pub fn band(&self, step_seconds: u64) -> Option<&MrtgBand> {
        self.bands.iter().find(|b| b.step_seconds == step_seconds)
    }

    /// All bands of one direction, finest first.
    pub fn series(&self, direction: Direction) -> Vec<TimeSeries> {
        self.bands
            .iter()
            .map(|b| match direction {
                Direction::In => b.incoming.clone(),
                Direction::Out => b.outgoing.clone(),
            })
            .collect()
    }
}

struct Row {
    line: usize,
    ts: i64,
    avg_in: f64,
    avg_out: f64,
}

fn field<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T> {
    tok.parse().map_err(|_| Error::Parse { line, message: format!("cannot parse {what} from {tok:?}") })
}

fn classify(spacing: i64) -> Option<usize> {
    MRTG_BAND_STEPS
        .iter()
        .position(|&s| (spacing as f64 - s as f64).abs() <= SPACING_TOLERANCE * s as f64)
}

pub fn parse_mrtg_log(path: impl AsRef<Path>) -> Result<MrtgLog> {
    parse_mrtg_str(&std::fs::read_to_string(path)?)
}

pub fn parse_mrtg_str(text: &str) -> Result<MrtgLog> {
    let mut header = None;
    let mut rows: Vec<Row> = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let toks: Vec<&str> = raw.split_whitespace().collect();
        if toks.is_empty() {
            continue;
        }
        if header.is_none() && rows.is_empty() {
            if toks.len() != 3 {
                return Err(Error::Parse { line, message: format!("header needs 3 fields, found {}", toks.len()) });
            }
            header = Some((
                field(toks[0], line, "timestamp")?,
                field(toks[1], line, "in counter")?,
                field(toks[2], line, "out counter")?,
            ));
            continue;
        }
        if toks.len() != 5 {
            return Err(Error::Parse { line, message: format!("data row needs 5 fields, found {}", toks.len()) });
        }
        let row = Row {
            line,
            ts: field(toks[0], line, "timestamp")?,
            avg_in: field(toks[1], line, "average in")?,
            avg_out: field(toks[2], line, "average out")?,
        };
        field::<f64>(toks[3], line, "max in")?;
        field::<f64>(toks[4], line, "max out")?;
        if let Some(prev) = rows.last() {
            if row.ts >= prev.ts {
                return Err(Error::Parse {
                    line,
                    message: format!("timestamp {} is not older than {} on line {}", row.ts, prev.ts, prev.line),
                });
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Ok(MrtgLog { header, bands: vec![] });
    }

    // A row takes the finer of the bands suggested by its gaps to the older and
    // newer neighbours, so the oldest row of a band is not pulled into the
    // next coarser band by the jump between them.
    let mut band: Vec<Option<usize>> = (0..rows.len())
        .map(|i| {
            let older = (i + 1 < rows.len()).then(|| rows[i].ts - rows[i + 1].ts).and_then(classify);
            let newer = (i > 0).then(|| rows[i - 1].ts - rows[i].ts).and_then(classify);
            match (older, newer) {
                (Some(a), Some(b)) => Some(a.min(b)),
                (a, b) if rows.len() > 1 => a.or(b),
                _ => Some(0),
            }
        })
        .collect();
    // rows with no matching gap join the band of their newer neighbour
    for i in 0..band.len() {
        if band[i].is_none() {
            band[i] = band[..i].iter().rev().flatten().next().copied();
        }
    }
    for i in (0..band.len()).rev() {
        if band[i].is_none() {
            band[i] = band[i + 1..].iter().flatten().next().copied();
        }
    }
    if band.iter().any(Option::is_none) {
        return Err(Error::Parse {
            line: rows[0].line,
            message: "no row spacing matches a known MRTG band".into(),
        });
    }

    let mut bands = Vec::new();
    for (b, &step) in MRTG_BAND_STEPS.iter().enumerate() {
        // oldest first
        let members: Vec<&Row> = rows.iter().zip(&band).filter(|(_, k)| **k == Some(b)).map(|(r, _)| r).rev().collect();
        let Some(oldest) = members.first() else { continue };
        let newest = members.last().expect("non-empty");
        let start = oldest.ts - step as i64;
        let len = ((newest.ts - oldest.ts) as f64 / step as f64).round() as usize + 1;
        let mut incoming = vec![None; len];
        let mut outgoing = vec![None; len];
        for r in &members {
            let idx = ((r.ts - oldest.ts) as f64 / step as f64).round() as usize;
            incoming[idx] = Some(r.avg_in);
            outgoing[idx] = Some(r.avg_out);
        }
        let mode = if b == 0 { AggregationMode::Raw } else { AggregationMode::Arithmetic };
        bands.push(MrtgBand {
            step_seconds: step,
            incoming: TimeSeries::new(start, step, incoming).with_mode(mode),
            outgoing: TimeSeries::new(start, step, outgoing).with_mode(mode),
        });
    }
    Ok(MrtgLog { header, bands })
}
