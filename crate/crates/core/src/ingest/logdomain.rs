//! Log-domain wrapping for multiplicative traffic.

use serde::{Deserialize, Serialize};

use super::dataset::{MultiScaleDataset, ValueScale};
use crate::aggregation::FloorPolicy;
use crate::error::{Error, Result};
use crate::inference::ForecastDistribution;
use crate::series::AggregationMode;

#[derive(Debug, Clone, PartialEq)]
pub struct LogWrapped {
    pub dataset: MultiScaleDataset,
    /// `(segment, index)` of every value raised to the floor before `ln`.
    pub floored: Vec<(usize, usize)>,
}

/// Replaces training values by their logs.
///
/// Averaged segments must be geometric means: the log of an arithmetic mean
/// is not an average of logs. Non-positive values are handled by `floor`.
/// The holdout stays in original units.
pub fn log_domain_wrap(dataset: &MultiScaleDataset, floor: FloorPolicy) -> Result<LogWrapped> {
    dataset.validate()?;
    if dataset.scale == ValueScale::Log {
        return Err(Error::ModeConflict("dataset is already in the log domain".into()));
    }
    for (seg, r) in dataset.segments.iter().zip(dataset.factors()) {
        if r > 1 && seg.mode == AggregationMode::Arithmetic {
            return Err(Error::ModeConflict(format!(
                "the {}s segment is arithmetically aggregated and cannot be log-wrapped; aggregate geometrically",
                seg.step_seconds
            )));
        }
    }
    // one floor for the whole dataset
    let floor = match floor {
        FloorPolicy::Auto => {
            let min = dataset
                .segments
                .iter()
                .flat_map(|s| s.observed())
                .filter(|v| *v > 0.0)
                .fold(f64::INFINITY, f64::min);
            FloorPolicy::Fixed(if min.is_finite() { min * 1e-3 } else { 1e-3 })
        }
        other => other,
    };
    let mut out = dataset.clone();
    let mut floored = Vec::new();
    for (k, seg) in out.segments.iter_mut().enumerate() {
        let (values, idx) = crate::aggregation::apply_floor(&seg.values, floor)?;
        seg.values = values.into_iter().map(|v| v.map(f64::ln)).collect();
        floored.extend(idx.into_iter().map(|i| (k, i)));
    }
    out.scale = ValueScale::Log;
    Ok(LogWrapped { dataset: out, floored })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum PointKind {
    Mean,
    #[default]
    Median,
}

/// Point forecast path in original units.
///
/// For log-domain forecasts the mean combines per-component log-normal means
/// and the median is the mixture median mapped through `exp`.
pub fn unwrap_forecast(forecast: &ForecastDistribution, kind: PointKind) -> Vec<f64> {
    match kind {
        PointKind::Mean => forecast.mean_path(),
        PointKind::Median => forecast.median_path(),
    }
}
