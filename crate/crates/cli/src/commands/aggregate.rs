use std::path::PathBuf;

use anyhow::{Context, Result};
use log::{info, warn};
use mssm_core::aggregation::{aggregate_series, FloorPolicy};
use mssm_core::ingest::{parse_csv, write_csv, CsvOptions};
use mssm_core::AggregationMode;

use super::Outcome;
use crate::check;

#[derive(Debug, Clone)]
pub struct AggregateOptions {
    pub input: PathBuf,
    pub csv: CsvOptions,
    pub ratio: usize,
    pub mode: AggregationMode,
    pub floor: FloorPolicy,
    pub output: PathBuf,
    pub check: bool,
}

pub fn run(opts: &AggregateOptions) -> Result<Outcome> {
    let series = parse_csv(&opts.input, &opts.csv).with_context(|| format!("reading {}", opts.input.display()))?;
    let agg = aggregate_series(&series, opts.ratio, opts.mode, opts.floor)?;
    if agg.dropped > 0 {
        info!("dropped {} oldest samples that do not fill a window", agg.dropped);
    }
    if !agg.floored.is_empty() {
        warn!("floored {} non-positive samples", agg.floored.len());
    }
    write_csv(&opts.output, &agg.series).with_context(|| format!("writing {}", opts.output.display()))?;
    if opts.check {
        check::series(&opts.output, agg.series.step_seconds)?;
    }
    Ok(Outcome::Done)
}
