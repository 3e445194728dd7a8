use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use log::info;
use mssm_core::eval::{evaluate, write_forecast_csv, EvalReport};
use mssm_core::inference::{forecast, ForecastConfig, ForecastDistribution, PosteriorFile, Problem};
use mssm_core::ingest::MultiScaleDataset;

use super::fit::datasets;
use super::{tagged, write_json, Outcome};
use crate::check;
use crate::config::{ForecastSettings, RunConfig};
use crate::data::load_dataset;

/// Forecasts from a stored posterior, filtering `dataset` with the initial
/// state recorded at fit time.
pub fn forecast_dataset(
    dataset: MultiScaleDataset,
    file: &PosteriorFile,
    settings: &ForecastSettings,
    seed: u64,
    threads: usize,
) -> Result<ForecastDistribution> {
    let mut problem = Problem::new(dataset, file.spec.clone(), file.priors.clone())?;
    problem.initial_state = file.initial_state;
    let config = ForecastConfig { horizon: settings.horizon, num_samples: settings.num_samples, seed, threads };
    Ok(forecast(&problem, &file.posterior(), &config)?)
}

/// Evaluates against the dataset's holdout when it has one.
pub fn report(f: &ForecastDistribution, dataset: &MultiScaleDataset, settings: &ForecastSettings, seed: u64) -> Result<EvalReport> {
    let actual = dataset.holdout.as_ref().map(|h| h.values.as_slice());
    if let Some(a) = actual {
        if a.len() > f.horizon() {
            bail!("the horizon ({}) is shorter than the {}-step holdout", f.horizon(), a.len());
        }
    }
    Ok(evaluate(f, actual, settings.mc_samples, seed)?)
}

#[derive(Debug, Clone)]
pub struct ForecastOptions {
    pub posterior: PathBuf,
    pub out: PathBuf,
    pub report: PathBuf,
    pub check: bool,
}

pub fn run(cfg: &RunConfig, opts: &ForecastOptions) -> Result<Outcome> {
    let seed = cfg.require_seed()?;
    let joint = PosteriorFile::load(&opts.posterior).with_context(|| format!("loading {}", opts.posterior.display()))?;
    let dataset = load_dataset(&cfg.data, joint.spec.fine_step_seconds)?;
    for (tag, ds) in datasets(cfg, dataset) {
        let (posterior, out, report_path) = match tag {
            Some(t) => (tagged(&opts.posterior, t), tagged(&opts.out, t), tagged(&opts.report, t)),
            None => (opts.posterior.clone(), opts.out.clone(), opts.report.clone()),
        };
        let file = match tag {
            Some(_) => PosteriorFile::load(&posterior).with_context(|| format!("loading {}", posterior.display()))?,
            None => joint.clone(),
        };
        let f = forecast_dataset(ds.clone(), &file, &cfg.forecast, seed, cfg.threads)?;
        f.validate()?;
        let mut buf = Vec::new();
        write_forecast_csv(&mut buf, &f)?;
        super::write_text(&out, std::str::from_utf8(&buf)?)?;
        let r = report(&f, &ds, &cfg.forecast, seed)?;
        write_json(&report_path, &r)?;
        info!(
            "expected MAE {:.4} ± {:.4}; wrote {} and {}",
            r.expected_mae.mean,
            r.expected_mae.std_error,
            out.display(),
            report_path.display()
        );
        if opts.check {
            check::ribbon(&out)?;
            check::report(&report_path)?;
        }
    }
    Ok(Outcome::Done)
}
