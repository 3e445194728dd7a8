use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::likelihood::Problem;
use super::vi::PosteriorSurrogate;
use crate::error::{Error, Result};
use crate::ingest::ValueScale;
use crate::lgssm::forecast_from_predicted;
use crate::structural::Params;

/// Fraction of posterior samples that must forecast successfully.
pub const MIN_SUCCESS_FRACTION: f64 = 0.8;
pub const DEFAULT_FORECAST_SAMPLES: usize = 50;

const QUANTILE_TOLERANCE: f64 = 1e-6;

/// Equally weighted mixture of Gaussian forecast trajectories.
///
/// Component values live in the model domain; with [`ValueScale::Log`] they
/// are logs and the original-unit accessors apply `exp`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForecastDistribution {
    /// Timestamp of the start of the first forecast step.
    pub start: i64,
    pub step_seconds: u64,
    #[serde(default)]
    pub scale: ValueScale,
    /// `means[s][h]` for component `s` at step `h`.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
}

fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

fn normal_cdf(x: f64, mean: f64, var: f64) -> f64 {
    if var > 0.0 {
        std_normal_cdf((x - mean) / var.sqrt())
    } else if x >= mean {
        1.0
    } else {
        0.0
    }
}

impl ForecastDistribution {
    pub fn new(start: i64, step_seconds: u64, scale: ValueScale, means: Vec<Vec<f64>>, variances: Vec<Vec<f64>>) -> Result<Self> {
        let f = Self { start, step_seconds, scale, means, variances };
        f.validate()?;
        Ok(f)
    }

    pub fn validate(&self) -> Result<()> {
        let Some(first) = self.means.first() else {
            return Err(Error::Forecast("forecast has no components".into()));
        };
        let h = first.len();
        if h == 0 {
            return Err(Error::Forecast("forecast has zero horizon".into()));
        }
        if self.variances.len() != self.means.len()
            || self.means.iter().chain(&self.variances).any(|row| row.len() != h)
        {
            return Err(Error::Forecast("component trajectories have inconsistent lengths".into()));
        }
        if self.means.iter().flatten().any(|m| !m.is_finite()) {
            return Err(Error::Forecast("non-finite component mean".into()));
        }
        if self.variances.iter().flatten().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::Forecast("component variances must be finite and non-negative".into()));
        }
        Ok(())
    }

    pub fn horizon(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn num_components(&self) -> usize {
        self.means.len()
    }

    pub fn timestamp(&self, h: usize) -> i64 {
        self.start + (h as u64 * self.step_seconds) as i64
    }

    fn component(&self, h: usize) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.means.iter().zip(&self.variances).map(move |(m, v)| (m[h], v[h]))
    }

    /// Mixture mean in the model domain.
    pub fn model_mean(&self, h: usize) -> f64 {
        self.component(h).map(|(m, _)| m).sum::<f64>() / self.num_components() as f64
    }

    /// Mixture variance in the model domain (law of total variance).
    pub fn model_variance(&self, h: usize) -> f64 {
        let s = self.num_components() as f64;
        let second = self.component(h).map(|(m, v)| v + m * m).sum::<f64>() / s;
        let mean = self.model_mean(h);
        (second - mean * mean).max(0.0)
    }

    /// Mixture CDF in the model domain.
    pub fn model_cdf(&self, h: usize, x: f64) -> f64 {
        self.component(h).map(|(m, v)| normal_cdf(x, m, v)).sum::<f64>() / self.num_components() as f64
    }

    fn model_quantile(&self, h: usize, p: f64) -> f64 {
        if self.component(h).all(|(_, v)| v == 0.0) {
            // step-function CDF: exact order statistic
            let mut m: Vec<f64> = self.component(h).map(|(m, _)| m).collect();
            m.sort_by(f64::total_cmp);
            let k = ((p * m.len() as f64).ceil() as usize).clamp(1, m.len());
            return m[k - 1];
        }
        let (mut lo, mut hi) = self
            .component(h)
            .map(|(m, v)| (m - 12.0 * v.sqrt(), m + 12.0 * v.sqrt()))
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), (l, u)| (a.min(l), b.max(u)));
        while self.model_cdf(h, lo) > p {
            lo -= (hi - lo).max(1.0);
        }
        while self.model_cdf(h, hi) < p {
            hi += (hi - lo).max(1.0);
        }
        while hi - lo > QUANTILE_TOLERANCE {
            let mid = 0.5 * (lo + hi);
            if mid <= lo || mid >= hi {
                break;
            }
            if self.model_cdf(h, mid) < p {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn to_original(&self, x: f64) -> f64 {
        match self.scale {
            ValueScale::Linear => x,
            ValueScale::Log => x.exp(),
        }
    }

    /// Quantile in original units, by bisection on the mixture CDF.
    pub fn quantile(&self, h: usize, p: f64) -> f64 {
        self.to_original(self.model_quantile(h, p.clamp(0.0, 1.0)))
    }

    pub fn median(&self, h: usize) -> f64 {
        self.quantile(h, 0.5)
    }

    /// Mixture mean in original units; log-normal moments in the log domain.
    pub fn mean(&self, h: usize) -> f64 {
        match self.scale {
            ValueScale::Linear => self.model_mean(h),
            ValueScale::Log => {
                self.component(h).map(|(m, v)| (m + 0.5 * v).exp()).sum::<f64>() / self.num_components() as f64
            }
        }
    }

    /// Point forecast: mean for linear data, median for log data.
    pub fn point(&self, h: usize) -> f64 {
        match self.scale {
            ValueScale::Linear => self.mean(h),
            ValueScale::Log => self.median(h),
        }
    }

    pub fn mean_path(&self) -> Vec<f64> {
        (0..self.horizon()).map(|h| self.mean(h)).collect()
    }

    pub fn median_path(&self) -> Vec<f64> {
        (0..self.horizon()).map(|h| self.median(h)).collect()
    }

    pub fn point_path(&self) -> Vec<f64> {
        (0..self.horizon()).map(|h| self.point(h)).collect()
    }

    /// Average model-domain variance over the horizon.
    pub fn mean_variance(&self) -> f64 {
        (0..self.horizon()).map(|h| self.model_variance(h)).sum::<f64>() / self.horizon() as f64
    }

    /// Draws one trajectory in original units from component `s`.
    pub fn sample_component<R: Rng + ?Sized>(&self, s: usize, rng: &mut R) -> Vec<f64> {
        self.means[s]
            .iter()
            .zip(&self.variances[s])
            .map(|(m, v)| self.to_original(m + v.sqrt() * rng.sample::<f64, _>(rand_distr::StandardNormal)))
            .collect()
    }
}

/// Parameter uncertainty to integrate over when forecasting.
#[derive(Debug, Clone, PartialEq)]
pub enum Posterior {
    Surrogate(PosteriorSurrogate),
    /// Explicit parameter draws, one component each.
    Points(Vec<Params>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForecastConfig {
    pub horizon: usize,
    pub num_samples: usize,
    pub seed: u64,
    /// Worker threads; results do not depend on this.
    pub threads: usize,
}

impl Default for ForecastConfig {
    fn default() -> Self {
        Self { horizon: crate::ingest::DEFAULT_HOLDOUT_STEPS, num_samples: DEFAULT_FORECAST_SAMPLES, seed: 0, threads: 1 }
    }
}

/// Forecasts `config.horizon` fine steps past the training data of `problem`.
///
/// Parameter draws are taken sequentially from a seeded stream, so the
/// mixture does not depend on the number of threads. Draws whose filter fails
/// are dropped as long as enough succeed.
pub fn forecast(problem: &Problem, posterior: &Posterior, config: &ForecastConfig) -> Result<ForecastDistribution> {
    if config.horizon == 0 {
        return Err(Error::Parameter("forecast horizon must be at least 1".into()));
    }
    let draws: Vec<Params> = match posterior {
        Posterior::Surrogate(s) => {
            s.validate()?;
            s.check_layout(&problem.layout)?;
            if config.num_samples == 0 {
                return Err(Error::Parameter("num_samples must be at least 1".into()));
            }
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
            (0..config.num_samples).map(|_| s.sample(&problem.layout, &mut rng)).collect::<Result<_>>()?
        }
        Posterior::Points(p) if p.is_empty() => return Err(Error::Parameter("no parameter draws".into())),
        Posterior::Points(p) => p.clone(),
    };
    let run = |params: &Params| -> Result<(Vec<f64>, Vec<f64>)> {
        let (model, next) = problem.next_belief(params)?;
        let steps = forecast_from_predicted(&model, &next, config.horizon)?;
        Ok(steps.iter().map(|o| (o.mean[0], o.cov[(0, 0)])).unzip())
    };
    let results: Vec<Result<(Vec<f64>, Vec<f64>)>> = if config.threads <= 1 {
        draws.iter().map(run).collect()
    } else {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(config.threads)
            .build()
            .map_err(|e| Error::Forecast(format!("cannot start worker pool: {e}")))?;
        pool.install(|| draws.par_iter().map(run).collect())
    };
    let total = results.len();
    let mut means = Vec::with_capacity(total);
    let mut variances = Vec::with_capacity(total);
    let mut last_error = None;
    for (i, r) in results.into_iter().enumerate() {
        match r {
            Ok((m, v)) => {
                means.push(m);
                variances.push(v);
            }
            Err(e) => {
                log::warn!("posterior sample {i} skipped: {e}");
                last_error = Some(e);
            }
        }
    }
    if (means.len() as f64) < MIN_SUCCESS_FRACTION * total as f64 {
        return Err(Error::Forecast(format!(
            "only {} of {total} posterior samples forecast successfully; last error: {}",
            means.len(),
            last_error.map(|e| e.to_string()).unwrap_or_default()
        )));
    }
    ForecastDistribution::new(
        problem.dataset.training_end(),
        problem.dataset.fine_step(),
        problem.dataset.scale,
        means,
        variances,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single(mean: f64, var: f64) -> ForecastDistribution {
        ForecastDistribution::new(0, 60, ValueScale::Linear, vec![vec![mean]], vec![vec![var]]).unwrap()
    }

    #[test]
    fn single_component_quantiles_are_gaussian() {
        let f = single(3.0, 4.0);
        assert!((f.quantile(0, 0.5) - 3.0).abs() < 1e-6);
        // z_{0.95} = 1.6448536...
        assert!((f.quantile(0, 0.95) - (3.0 + 2.0 * 1.644_853_626_951_472)).abs() < 2e-6);
        assert_eq!(f.mean(0), 3.0);
        assert_eq!(f.model_variance(0), 4.0);
    }

    #[test]
    fn zero_variance_component() {
        let f = single(1.5, 0.0);
        assert!((f.median(0) - 1.5).abs() < 1e-6);
    }

    #[test]
    fn log_scale_moments() {
        let f = ForecastDistribution::new(0, 60, ValueScale::Log, vec![vec![0.0]], vec![vec![4f64.ln()]]).unwrap();
        assert!((f.mean(0) - 2.0).abs() < 1e-12);
        assert!((f.median(0) - 1.0).abs() < 1e-6);
        assert!((f.point(0) - 1.0).abs() < 1e-6);
    }

    #[test]
    fn validation() {
        assert!(ForecastDistribution::new(0, 60, ValueScale::Linear, vec![], vec![]).is_err());
        assert!(ForecastDistribution::new(0, 60, ValueScale::Linear, vec![vec![0.0]], vec![vec![-1.0]]).is_err());
        assert!(ForecastDistribution::new(0, 60, ValueScale::Linear, vec![vec![0.0, 1.0]], vec![vec![1.0]]).is_err());
    }
}
