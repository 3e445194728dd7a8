use serde::{Deserialize, Serialize};

use super::likelihood::Problem;
use super::optimize::{nelder_mead, NelderMeadConfig};
use super::transform::ParamKind;
use crate::error::{Error, Result};
use crate::structural::Params;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct MapConfig {
    pub optimizer: NelderMeadConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapDiagnostics {
    /// Best objective after each optimizer iteration.
    pub trace: Vec<f64>,
    pub evaluations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MapFit {
    pub params: Params,
    pub unconstrained: Vec<f64>,
    pub log_posterior: f64,
    pub diagnostics: MapDiagnostics,
}

/// Heuristic starting point from the scale of first differences of the data.
pub fn data_start(problem: &Problem) -> Option<Vec<f64>> {
    let seg = problem.dataset.segments.iter().rev().find(|s| s.observed().count() > 2)?;
    let diffs: Vec<f64> = seg.values.windows(2).filter_map(|w| Some(w[1]? - w[0]?)).collect();
    if diffs.len() < 2 {
        return None;
    }
    let mean = diffs.iter().sum::<f64>() / diffs.len() as f64;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (diffs.len() - 1) as f64;
    let d = (var / 2.0).sqrt();
    if !(d.is_finite() && d > 0.0) {
        return None;
    }
    Some(
        problem
            .layout
            .kinds()
            .iter()
            .map(|k| match k {
                ParamKind::SigmaLevel => (0.2 * d).ln(),
                ParamKind::SigmaSlope => (0.002 * d).ln(),
                ParamKind::SigmaSeasonal(_) => (0.02 * d).ln(),
                ParamKind::SigmaAr => (0.5 * d).ln(),
                ParamKind::ArCoef => 0.5f64.atanh(),
                ParamKind::SigmaObs => (0.3 * d).ln(),
            })
            .collect(),
    )
}

fn dump(problem: &Problem, u: &[f64]) -> String {
    problem
        .layout
        .names()
        .iter()
        .zip(u)
        .map(|(n, v)| format!("{n}={v:.6}"))
        .collect::<Vec<_>>()
        .join(", ")
}

/// Maximizes the log posterior in unconstrained space.
///
/// Without `start`, the better of the prior centre and a data-scaled guess
/// is used.
pub fn fit_map(problem: &Problem, config: &MapConfig, start: Option<&[f64]>) -> Result<MapFit> {
    let candidates: Vec<Vec<f64>> = match start {
        Some(s) => {
            if s.len() != problem.dim() {
                return Err(Error::Dimension(format!("start has {} coordinates, expected {}", s.len(), problem.dim())));
            }
            vec![s.to_vec()]
        }
        None => std::iter::once(problem.priors.center(&problem.layout)).chain(data_start(problem)).collect(),
    };
    let mut best: Option<(Vec<f64>, f64)> = None;
    let mut first_error = None;
    for c in candidates {
        match problem.log_posterior(&c) {
            Ok(v) if best.as_ref().is_none_or(|b| v > b.1) => best = Some((c, v)),
            Ok(_) => {}
            Err(e) => {
                first_error.get_or_insert((c, e));
            }
        }
    }
    let Some((x0, _)) = best else {
        let (c, e) = first_error.expect("at least one candidate");
        return Err(Error::Initialization { message: e.to_string(), params: dump(problem, &c) });
    };
    let result = nelder_mead(|u| problem.objective(u), &x0, &config.optimizer);
    let params = problem.layout.from_unconstrained(&result.x)?;
    log::debug!("map: {} evaluations, objective {:.4}", result.evaluations, result.value);
    Ok(MapFit {
        params,
        unconstrained: result.x,
        log_posterior: result.value,
        diagnostics: MapDiagnostics {
            trace: result.trace,
            evaluations: result.evaluations,
            converged: result.converged,
        },
    })
}
