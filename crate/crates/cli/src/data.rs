//! Turns configured inputs into a training dataset.

use anyhow::{bail, Context, Result};
use log::{info, warn};
use mssm_core::aggregation::aggregate_series;
use mssm_core::ingest::{build_dataset, log_domain_wrap, parse_csv, parse_mrtg_log, MultiScaleDataset};
use mssm_core::{AggregationMode, TimeSeries};

use crate::config::DataConfig;

fn read_inputs(cfg: &DataConfig) -> Result<Vec<TimeSeries>> {
    let mut out = Vec::new();
    for input in &cfg.inputs {
        let path = &input.path;
        if input.is_mrtg() {
            let log = parse_mrtg_log(path).with_context(|| format!("reading MRTG log {}", path.display()))?;
            out.extend(log.series(input.direction));
        } else {
            out.push(parse_csv(path, &input.csv).with_context(|| format!("reading CSV {}", path.display()))?);
        }
    }
    Ok(out.into_iter().filter(|s| !s.is_empty()).collect())
}

/// Loads, aligns and optionally log-wraps the configured inputs.
///
/// Series finer than `fine_step` are averaged up to it (geometrically in the
/// log domain). Coarse CSV series take `coarse_mode`.
pub fn load_dataset(cfg: &DataConfig, fine_step: u64) -> Result<MultiScaleDataset> {
    let mut series = Vec::new();
    for s in read_inputs(cfg)? {
        if s.step_seconds < fine_step {
            if fine_step % s.step_seconds != 0 {
                bail!("a {}s series cannot be averaged to the {fine_step}s fine step", s.step_seconds);
            }
            let mode = if cfg.log_domain { AggregationMode::Geometric } else { AggregationMode::Arithmetic };
            let r = (fine_step / s.step_seconds) as usize;
            let agg = aggregate_series(&s, r, mode, cfg.floor)?;
            info!("averaged a {}s series to {fine_step}s, dropping {} oldest samples", s.step_seconds, agg.dropped);
            // the finest series stays raw data at the fine step
            series.push(agg.series.with_mode(AggregationMode::Raw));
        } else if s.step_seconds > fine_step && s.mode == AggregationMode::Raw {
            series.push(s.with_mode(cfg.coarse_mode));
        } else {
            series.push(s);
        }
    }
    let dataset = if series.is_empty() {
        warn!("no observations; fitting will return the prior");
        MultiScaleDataset::empty(fine_step, 0)
    } else {
        build_dataset(series, fine_step, cfg.holdout_steps)?
    };
    if !cfg.log_domain {
        return Ok(dataset);
    }
    let wrapped = log_domain_wrap(&dataset, cfg.floor)?;
    if !wrapped.floored.is_empty() {
        warn!("{} non-positive samples floored before taking logs", wrapped.floored.len());
    }
    Ok(wrapped.dataset)
}
