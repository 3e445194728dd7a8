use serde::{Deserialize, Serialize};

/// How the samples of a series were produced from finer data.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum AggregationMode {
    #[default]
    Raw,
    Arithmetic,
    Geometric,
}

/// Regularly sampled series; sample `i` covers `[start + i*step, start + (i+1)*step)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeSeries {
    /// Unix seconds of the first sample.
    pub start: i64,
    pub step_seconds: u64,
    /// `None` marks a missing sample.
    pub values: Vec<Option<f64>>,
    #[serde(default)]
    pub mode: AggregationMode,
}

impl TimeSeries {
    pub fn new(start: i64, step_seconds: u64, values: Vec<Option<f64>>) -> Self {
        Self { start, step_seconds, values, mode: AggregationMode::Raw }
    }

    pub fn from_values(start: i64, step_seconds: u64, values: &[f64]) -> Self {
        Self::new(start, step_seconds, values.iter().copied().map(Some).collect())
    }

    pub fn with_mode(mut self, mode: AggregationMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn timestamp(&self, i: usize) -> i64 {
        self.start + (i as i64) * self.step_seconds as i64
    }

    /// Exclusive end of the covered span.
    pub fn end(&self) -> i64 {
        self.timestamp(self.len())
    }

    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values.iter().filter_map(|v| *v)
    }

    /// Sub-series of samples `range`.
    pub fn slice(&self, range: std::ops::Range<usize>) -> TimeSeries {
        TimeSeries {
            start: self.timestamp(range.start),
            step_seconds: self.step_seconds,
            values: self.values[range].to_vec(),
            mode: self.mode,
        }
    }
}
