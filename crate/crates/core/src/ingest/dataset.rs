use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::TimeSeries;

/// Default holdout: two days of 30-minute samples.
pub const DEFAULT_HOLDOUT_STEPS: usize = 96;

/// Domain the training values live in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum ValueScale {
    #[default]
    Linear,
    /// Training values are logs of the original values.
    Log,
}

/// Contiguous segments ordered coarse to fine, plus an optional holdout.
///
/// Segment `i` ends exactly where segment `i + 1` starts and every step is an
/// integer multiple of the next finer step. The holdout continues the finest
/// segment and is always kept in original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiScaleDataset {
    pub segments: Vec<TimeSeries>,
    pub holdout: Option<TimeSeries>,
    #[serde(default)]
    pub scale: ValueScale,
}

impl MultiScaleDataset {
    pub fn new(segments: Vec<TimeSeries>, holdout: Option<TimeSeries>) -> Result<Self> {
        let ds = Self { segments, holdout, scale: ValueScale::Linear };
        ds.validate()?;
        Ok(ds)
    }

    /// A dataset with no observations at the given fine step.
    pub fn empty(fine_step_seconds: u64, start: i64) -> Self {
        Self {
            segments: vec![TimeSeries::new(start, fine_step_seconds, vec![])],
            holdout: None,
            scale: ValueScale::Linear,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let Some(fine) = self.segments.last() else {
            return Err(Error::Dataset("dataset has no segments".into()));
        };
        for s in &self.segments {
            if s.step_seconds == 0 {
                return Err(Error::Dataset("segment with zero step".into()));
            }
        }
        for pair in self.segments.windows(2) {
            let (coarse, finer) = (&pair[0], &pair[1]);
            if coarse.step_seconds < finer.step_seconds || coarse.step_seconds % finer.step_seconds != 0 {
                return Err(Error::Dataset(format!(
                    "step {} is not an integer multiple of the next finer step {}",
                    coarse.step_seconds, finer.step_seconds
                )));
            }
            if coarse.end() != finer.start {
                return Err(Error::Dataset(format!(
                    "segments are not contiguous: coarse ends at {}, next starts at {}",
                    coarse.end(),
                    finer.start
                )));
            }
        }
        if let Some(h) = &self.holdout {
            if h.step_seconds != fine.step_seconds || h.start != fine.end() {
                return Err(Error::Dataset("holdout must continue the finest segment".into()));
            }
        }
        Ok(())
    }

    pub fn fine_step(&self) -> u64 {
        self.segments.last().map_or(0, |s| s.step_seconds)
    }

    /// Ratios between consecutive resolutions, coarse to fine.
    pub fn ratios(&self) -> Vec<usize> {
        self.segments.windows(2).map(|p| (p[0].step_seconds / p[1].step_seconds) as usize).collect()
    }

    /// Aggregation factor of each segment relative to the finest step.
    pub fn factors(&self) -> Vec<usize> {
        let fine = self.fine_step();
        self.segments.iter().map(|s| (s.step_seconds / fine) as usize).collect()
    }

    /// Start of the first sample.
    pub fn start(&self) -> i64 {
        self.segments.first().map_or(0, |s| s.start)
    }

    /// End of the training data (start of the holdout / forecast).
    pub fn training_end(&self) -> i64 {
        self.segments.last().map_or(0, |s| s.end())
    }

    /// Earliest non-empty segment's observed values, oldest first.
    pub fn first_observations(&self, count: usize) -> Vec<f64> {
        self.segments
            .iter()
            .flat_map(|s| s.observed())
            .take(count)
            .collect()
    }

    /// The same dataset with all coarse segments removed.
    pub fn fine_only(&self) -> Self {
        Self {
            segments: self.segments.last().cloned().into_iter().collect(),
            holdout: self.holdout.clone(),
            scale: self.scale,
        }
    }
}

/// Orders series coarse to fine, trims coarse samples overlapping finer data,
/// pads gaps with missing samples and reserves a fine holdout suffix.
pub fn build_dataset(series: Vec<TimeSeries>, fine_step_seconds: u64, holdout_steps: usize) -> Result<MultiScaleDataset> {
    let mut series = series;
    series.sort_by(|a, b| b.step_seconds.cmp(&a.step_seconds));
    let Some(fine) = series.last() else {
        return Err(Error::Dataset("no series given".into()));
    };
    if fine.step_seconds != fine_step_seconds {
        return Err(Error::Dataset(format!(
            "finest series has step {}, expected {fine_step_seconds}",
            fine.step_seconds
        )));
    }
    for pair in series.windows(2) {
        let (c, f) = (pair[0].step_seconds, pair[1].step_seconds);
        if c == f || c % f != 0 {
            return Err(Error::Dataset(format!("step {c} is not an integer multiple of {f}")));
        }
    }
    let mut fine = series.pop().expect("checked non-empty");
    if fine.len() < holdout_steps {
        return Err(Error::Dataset(format!(
            "fine series has {} samples, fewer than the {holdout_steps}-step holdout",
            fine.len()
        )));
    }
    let split = fine.len() - holdout_steps;
    let holdout = (holdout_steps > 0).then(|| fine.slice(split..fine.len()));
    fine = fine.slice(0..split);

    // finest first while trimming, reversed at the end
    let mut kept = vec![fine];
    for mut coarse in series.into_iter().rev() {
        let next = kept.last_mut().expect("non-empty");
        let boundary = next.start;
        let step = coarse.step_seconds as i64;
        let keep = coarse
            .values
            .iter()
            .enumerate()
            .take_while(|(i, _)| coarse.timestamp(*i) + step <= boundary)
            .count();
        coarse.values.truncate(keep);
        if coarse.is_empty() {
            // nothing older than the finer data; re-anchor to end at the boundary
            let periods = (boundary - coarse.start).div_euclid(step);
            if periods <= 0 {
                continue;
            }
            coarse.start = boundary - periods * step;
        }
        while coarse.end() + step <= boundary {
            coarse.values.push(None);
        }
        let gap = boundary - coarse.end();
        if gap > 0 {
            let fstep = next.step_seconds as i64;
            if gap % fstep != 0 {
                return Err(Error::Dataset(format!(
                    "gap of {gap}s before {boundary} is not a multiple of the {fstep}s step"
                )));
            }
            let pad = (gap / fstep) as usize;
            next.values.splice(0..0, std::iter::repeat(None).take(pad));
            next.start -= gap;
        }
        if coarse.values.iter().all(Option::is_none) {
            continue;
        }
        kept.push(coarse);
    }
    kept.reverse();
    MultiScaleDataset::new(kept, holdout)
}
