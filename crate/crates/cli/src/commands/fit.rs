use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use log::info;
use mssm_core::inference::{fit_map, fit_vi, PosteriorFile, Problem, ViConfig};
use mssm_core::ingest::MultiScaleDataset;

use super::{tagged, Outcome};
use crate::check;
use crate::config::{FitMethod, FitSettings, RunConfig};
use crate::data::load_dataset;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Map,
    Vi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub file: PosteriorFile,
    /// Best MAP objective per iteration, then the ELBO per VI step.
    pub trace: Vec<(Stage, f64)>,
    pub converged: bool,
}

/// Fits one problem. VI starts from the MAP point, or directly from `start`
/// when one is given.
pub fn fit_problem(problem: &Problem, settings: &FitSettings, seed: u64, start: Option<&[f64]>) -> Result<FitResult> {
    let (spec, priors, init) = (&problem.spec, &problem.priors, &problem.initial_state);
    let mut trace = Vec::new();
    let vi_config = ViConfig { seed, ..settings.vi.clone() };
    if settings.method == FitMethod::Vi {
        if let Some(start) = start {
            let vi = fit_vi(problem, &vi_config, Some(start))?;
            trace.extend(vi.elbo_trace.iter().map(|v| (Stage::Vi, *v)));
            let file = PosteriorFile::from_surrogate(spec, priors, init, &vi.surrogate);
            return Ok(FitResult { file, trace, converged: vi.converged });
        }
    }
    let map = fit_map(problem, &settings.map, start)?;
    info!(
        "MAP log posterior {:.3} after {} evaluations{}",
        map.log_posterior,
        map.diagnostics.evaluations,
        if map.diagnostics.converged { "" } else { " (not converged)" }
    );
    trace.extend(map.diagnostics.trace.iter().map(|v| (Stage::Map, *v)));
    if settings.method == FitMethod::Map {
        let file = PosteriorFile::from_map(spec, priors, init, &map);
        return Ok(FitResult { file, trace, converged: map.diagnostics.converged });
    }
    let vi = fit_vi(problem, &vi_config, Some(&map.unconstrained))?;
    info!("VI final ELBO estimate {:.3}", vi.elbo_trace.last().copied().unwrap_or(f64::NAN));
    trace.extend(vi.elbo_trace.iter().map(|v| (Stage::Vi, *v)));
    let file = PosteriorFile::from_surrogate(spec, priors, init, &vi.surrogate);
    Ok(FitResult { file, trace, converged: map.diagnostics.converged && vi.converged })
}

pub fn write_trace(path: &Path, trace: &[(Stage, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("writing {}", path.display()))?;
    w.write_record(["stage", "iteration", "objective"])?;
    let mut counts = [0usize; 2];
    for (stage, value) in trace {
        let (name, i) = match stage {
            Stage::Map => ("map", 0),
            Stage::Vi => ("vi", 1),
        };
        w.write_record([name, &counts[i].to_string(), &value.to_string()])?;
        counts[i] += 1;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone)]
pub struct FitOptions {
    pub out: PathBuf,
    /// Defaults to the posterior path tagged `trace` with a `.csv` extension.
    pub trace: Option<PathBuf>,
    pub resume: Option<PathBuf>,
    pub check: bool,
}

/// The joint dataset, plus the finest segment alone when ablating.
pub fn datasets(cfg: &RunConfig, dataset: MultiScaleDataset) -> Vec<(Option<&'static str>, MultiScaleDataset)> {
    let mut out = Vec::new();
    if cfg.fit.ablate_coarse {
        out.push((Some("fine-only"), dataset.fine_only()));
    }
    out.insert(0, (None, dataset));
    out
}

pub fn run(cfg: &RunConfig, opts: &FitOptions) -> Result<Outcome> {
    let seed = cfg.require_seed()?;
    let spec = cfg.require_spec()?;
    let dataset = load_dataset(&cfg.data, spec.fine_step_seconds)?;
    let resume = opts.resume.as_deref().map(PosteriorFile::load).transpose().context("loading --resume posterior")?;
    let trace_path = opts.trace.clone().unwrap_or_else(|| tagged(&opts.out, "trace").with_extension("csv"));
    let mut outcome = Outcome::Done;
    for (tag, ds) in datasets(cfg, dataset) {
        let problem = Problem::new(ds, spec.clone(), cfg.priors.clone())?;
        let start = match &resume {
            Some(file) => {
                if file.spec != *spec {
                    bail!("the --resume posterior was fitted with a different model structure");
                }
                Some(file.center())
            }
            None => None,
        };
        let fit = fit_problem(&problem, &cfg.fit, seed, start)?;
        let (out, trace) = match tag {
            Some(t) => (tagged(&opts.out, t), tagged(&trace_path, t)),
            None => (opts.out.clone(), trace_path.clone()),
        };
        fit.file.validate()?;
        fit.file.save(&out).with_context(|| format!("writing {}", out.display()))?;
        write_trace(&trace, &fit.trace)?;
        info!("wrote {} and {}", out.display(), trace.display());
        if opts.check {
            check::posterior(&out)?;
            check::trace(&trace)?;
        }
        if !fit.converged {
            outcome = Outcome::NotConverged;
        }
    }
    Ok(outcome)
}
