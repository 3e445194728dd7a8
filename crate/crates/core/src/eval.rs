//! Forecast evaluation: expected MAE, holdout log-likelihood, comparisons and
//! ribbon export.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::ForecastDistribution;
use crate::ingest::ValueScale;

pub const DEFAULT_MC_SAMPLES: usize = 100;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Monte Carlo mean with its standard error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McEstimate {
    pub mean: f64,
    pub std_error: f64,
}

/// Expected mean absolute error of the forecast.
///
/// The reference is the forecast's own point path (mixture mean, or mixture
/// median in the log domain): each of `num_mc` trajectories is drawn by
/// picking a component uniformly and sampling independent Gaussian steps,
/// and its mean absolute deviation from the point path over the horizon is
/// one Monte Carlo draw. This measures the error to expect if the forecast
/// distribution is right, independent of realized data.
pub fn expected_mae<R: Rng + ?Sized>(forecast: &ForecastDistribution, num_mc: usize, rng: &mut R) -> Result<McEstimate> {
    if num_mc < 2 {
        return Err(Error::Parameter("expected MAE needs at least 2 Monte Carlo samples".into()));
    }
    forecast.validate()?;
    // canonical component order makes the estimate permutation invariant
    let mut order: Vec<usize> = (0..forecast.num_components()).collect();
    order.sort_by(|&a, &b| {
        let key = |s: usize| forecast.means[s].iter().chain(&forecast.variances[s]).copied();
        key(a).zip(key(b)).map(|(x, y)| x.total_cmp(&y)).find(|o| o.is_ne()).unwrap_or(std::cmp::Ordering::Equal)
    });
    let forecast = ForecastDistribution {
        means: order.iter().map(|&s| forecast.means[s].clone()).collect(),
        variances: order.iter().map(|&s| forecast.variances[s].clone()).collect(),
        ..forecast.clone()
    };
    let point = forecast.point_path();
    let draws: Vec<f64> = (0..num_mc)
        .map(|_| {
            let s = rng.random_range(0..forecast.num_components());
            let path = forecast.sample_component(s, rng);
            path.iter().zip(&point).map(|(y, p)| (y - p).abs()).sum::<f64>() / point.len() as f64
        })
        .collect();
    let n = num_mc as f64;
    let mean = draws.iter().sum::<f64>() / n;
    let var = draws.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(McEstimate { mean, std_error: (var / n).sqrt() })
}

fn log_sum_exp(terms: &[f64]) -> f64 {
    let max = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + terms.iter().map(|t| (t - max).exp()).sum::<f64>().ln()
}

/// Sum over holdout steps of the log mixture density of the actual value.
///
/// Missing actuals are skipped. In the log domain the density is that of the
/// original value (log-normal, including the `1/y` Jacobian).
pub fn holdout_log_likelihood(forecast: &ForecastDistribution, actual: &[Option<f64>]) -> Result<f64> {
    forecast.validate()?;
    if actual.len() > forecast.horizon() {
        return Err(Error::Forecast(format!(
            "holdout has {} steps but the forecast horizon is {}",
            actual.len(),
            forecast.horizon()
        )));
    }
    let ln_s = (forecast.num_components() as f64).ln();
    let mut total = 0.0;
    let mut terms = Vec::with_capacity(forecast.num_components());
    for (h, y) in actual.iter().enumerate() {
        let Some(y) = *y else { continue };
        let (x, jacobian) = match forecast.scale {
            ValueScale::Linear => (y, 0.0),
            ValueScale::Log if y > 0.0 => (y.ln(), -y.ln()),
            ValueScale::Log => {
                return Err(Error::Data {
                    message: "non-positive actual value under a log-domain forecast".into(),
                    indices: vec![h],
                })
            }
        };
        terms.clear();
        terms.extend(forecast.means.iter().zip(&forecast.variances).map(|(m, v)| {
            let (m, v) = (m[h], v[h]);
            if v > 0.0 {
                -0.5 * (LN_2PI + v.ln() + (x - m).powi(2) / v)
            } else if x == m {
                f64::INFINITY
            } else {
                f64::NEG_INFINITY
            }
        }));
        total += log_sum_exp(&terms) - ln_s + jacobian;
    }
    Ok(total)
}

/// Mean absolute error of a point path against the observed actuals.
pub fn point_mae(path: &[f64], actual: &[Option<f64>]) -> Result<f64> {
    if actual.len() > path.len() {
        return Err(Error::Forecast("holdout is longer than the forecast".into()));
    }
    let errs: Vec<f64> = actual.iter().zip(path).filter_map(|(y, p)| y.map(|y| (y - p).abs())).collect();
    if errs.is_empty() {
        return Err(Error::Data { message: "holdout has no observed values".into(), indices: vec![] });
    }
    Ok(errs.iter().sum::<f64>() / errs.len() as f64)
}

/// Fraction of observed holdout steps inside the central `level` interval.
pub fn interval_coverage(forecast: &ForecastDistribution, actual: &[Option<f64>], level: f64) -> (usize, usize) {
    let lo = 0.5 * (1.0 - level);
    let mut hit = 0;
    let mut total = 0;
    for (h, y) in actual.iter().enumerate().take(forecast.horizon()) {
        let Some(y) = *y else { continue };
        total += 1;
        if (forecast.quantile(h, lo)..=forecast.quantile(h, 1.0 - lo)).contains(&y) {
            hit += 1;
        }
    }
    (hit, total)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub expected_mae: McEstimate,
    pub holdout_log_likelihood: Option<f64>,
    pub point_mae_mean: Option<f64>,
    pub point_mae_median: Option<f64>,
    pub num_mc_samples: usize,
    pub horizon: usize,
}

/// Evaluates a forecast; holdout metrics are present when `actual` is given.
pub fn evaluate(forecast: &ForecastDistribution, actual: Option<&[Option<f64>]>, num_mc: usize, seed: u64) -> Result<EvalReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let expected_mae = expected_mae(forecast, num_mc, &mut rng)?;
    let (ll, mae_mean, mae_median) = match actual {
        Some(a) if a.iter().any(Option::is_some) => (
            Some(holdout_log_likelihood(forecast, a)?),
            Some(point_mae(&forecast.mean_path(), a)?),
            Some(point_mae(&forecast.median_path(), a)?),
        ),
        _ => (None, None, None),
    };
    Ok(EvalReport {
        expected_mae,
        holdout_log_likelihood: ll,
        point_mae_mean: mae_mean,
        point_mae_median: mae_median,
        num_mc_samples: num_mc,
        horizon: forecast.horizon(),
    })
}

/// `baseline` versus `candidate`, e.g. fine-only versus joint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    /// Baseline expected MAE over candidate expected MAE.
    pub expected_mae_ratio: f64,
    /// Candidate minus baseline holdout log-likelihood.
    pub log_likelihood_difference: Option<f64>,
    /// `exp` of the log-likelihood difference.
    pub likelihood_factor: Option<f64>,
}

pub fn compare(baseline: &EvalReport, candidate: &EvalReport) -> Result<Comparison> {
    if baseline.horizon != candidate.horizon {
        return Err(Error::Validation(format!(
            "horizon mismatch: {} versus {}",
            baseline.horizon, candidate.horizon
        )));
    }
    let delta = match (baseline.holdout_log_likelihood, candidate.holdout_log_likelihood) {
        (Some(a), Some(b)) => Some(b - a),
        _ => None,
    };
    Ok(Comparison {
        expected_mae_ratio: baseline.expected_mae.mean / candidate.expected_mae.mean,
        log_likelihood_difference: delta,
        likelihood_factor: delta.map(f64::exp),
    })
}

/// Ribbon CSV: `timestamp,mean,median,q05,q25,q75,q95` in original units.
pub fn write_forecast_csv<W: Write>(writer: W, forecast: &ForecastDistribution) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["timestamp", "mean", "median", "q05", "q25", "q75", "q95"])?;
    for h in 0..forecast.horizon() {
        let mut row = vec![forecast.timestamp(h).to_string(), forecast.mean(h).to_string()];
        row.extend([0.5, 0.05, 0.25, 0.75, 0.95].iter().map(|&p| forecast.quantile(h, p).to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}
