use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::likelihood::Problem;
use super::optimize::Adam;
use super::transform::{ParamLayout, Transform};
use crate::error::{Error, Result};
use crate::structural::Params;

/// Non-finite draws tolerated per step before giving up.
const MAX_REDRAWS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ViConfig {
    pub steps: usize,
    /// Monte Carlo draws per gradient estimate.
    pub mc_samples: usize,
    pub learning_rate: f64,
    /// Initial surrogate standard deviation in unconstrained space.
    pub init_std: f64,
    /// Forward-difference step for the log-posterior gradient.
    pub fd_step: f64,
    pub seed: u64,
}

impl Default for ViConfig {
    fn default() -> Self {
        Self { steps: 300, mc_samples: 1, learning_rate: 0.05, init_std: 0.1, fd_step: 1e-5, seed: 0 }
    }
}

/// Diagonal Gaussian over the unconstrained parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSurrogate {
    pub names: Vec<String>,
    pub transforms: Vec<Transform>,
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl PosteriorSurrogate {
    pub fn new(layout: &ParamLayout, mean: Vec<f64>, std: Vec<f64>) -> Result<Self> {
        let s = Self { names: layout.names(), transforms: layout.transforms(), mean, std };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let d = self.names.len();
        if self.transforms.len() != d || self.mean.len() != d || self.std.len() != d {
            return Err(Error::Dimension("surrogate fields have different lengths".into()));
        }
        if self.mean.iter().any(|m| !m.is_finite()) {
            return Err(Error::Parameter("surrogate mean is not finite".into()));
        }
        if self.std.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(Error::Parameter("surrogate standard deviations must be positive".into()));
        }
        Ok(())
    }

    /// Checks the surrogate was built for `layout`.
    pub fn check_layout(&self, layout: &ParamLayout) -> Result<()> {
        if self.names != layout.names() {
            return Err(Error::Parameter(format!(
                "surrogate parameters {:?} do not match model parameters {:?}",
                self.names,
                layout.names()
            )));
        }
        Ok(())
    }

    pub fn sample_unconstrained<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        self.mean.iter().zip(&self.std).map(|(m, s)| m + s * rng.sample::<f64, _>(StandardNormal)).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, layout: &ParamLayout, rng: &mut R) -> Result<Params> {
        layout.from_unconstrained(&self.sample_unconstrained(rng))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ViFit {
    pub surrogate: PosteriorSurrogate,
    /// Single-draw ELBO estimate per step.
    pub elbo_trace: Vec<f64>,
    pub converged: bool,
}

struct Draw {
    eps: Vec<f64>,
    value: f64,
    grad: Vec<f64>,
}

fn draw(problem: &Problem, mean: &[f64], std: &[f64], h: f64, rng: &mut ChaCha8Rng) -> Option<Draw> {
    let eps: Vec<f64> = (0..mean.len()).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
    let u: Vec<f64> = mean.iter().zip(std).zip(&eps).map(|((m, s), e)| m + s * e).collect();
    let value = problem.log_posterior(&u).ok()?;
    let mut grad = Vec::with_capacity(u.len());
    let mut shifted = u.clone();
    for i in 0..u.len() {
        shifted[i] = u[i] + h;
        let up = problem.log_posterior(&shifted).ok()?;
        shifted[i] = u[i];
        grad.push((up - value) / h);
    }
    grad.iter().all(|g| g.is_finite()).then_some(Draw { eps, value, grad })
}

/// Fits a diagonal Gaussian surrogate by stochastic ELBO ascent.
///
/// Gradients use the reparameterization `u = mean + std * eps` with a
/// finite-difference gradient of the log posterior. The entropy term is exact.
pub fn fit_vi(problem: &Problem, config: &ViConfig, start: Option<&[f64]>) -> Result<ViFit> {
    let d = problem.dim();
    if config.mc_samples == 0 {
        return Err(Error::Parameter("mc_samples must be at least 1".into()));
    }
    if !(config.init_std > 0.0 && config.fd_step > 0.0 && config.learning_rate > 0.0) {
        return Err(Error::Parameter("init_std, fd_step and learning_rate must be positive".into()));
    }
    let mut mean = match start {
        Some(s) if s.len() == d => s.to_vec(),
        Some(s) => return Err(Error::Dimension(format!("start has {} coordinates, expected {d}", s.len()))),
        None => problem.priors.center(&problem.layout),
    };
    let mut log_std = vec![config.init_std.ln(); d];
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut adam = Adam::new(2 * d, config.learning_rate);
    let entropy_const = 0.5 * d as f64 * (1.0 + (2.0 * std::f64::consts::PI).ln());
    let mut trace = Vec::with_capacity(config.steps);
    for step in 0..config.steps {
        let std: Vec<f64> = log_std.iter().map(|r| r.exp()).collect();
        let mut grad = vec![0.0; 2 * d];
        let mut value = 0.0;
        for _ in 0..config.mc_samples {
            let mut attempt = 0;
            let sample = loop {
                if let Some(s) = draw(problem, &mean, &std, config.fd_step, &mut rng) {
                    break s;
                }
                attempt += 1;
                if attempt > MAX_REDRAWS {
                    return Err(Error::Divergence { step, trace });
                }
            };
            value += sample.value;
            for i in 0..d {
                grad[i] += sample.grad[i];
                grad[d + i] += sample.grad[i] * sample.eps[i] * std[i];
            }
        }
        let k = config.mc_samples as f64;
        grad.iter_mut().for_each(|g| *g /= k);
        // entropy gradient w.r.t. log std
        grad[d..].iter_mut().for_each(|g| *g += 1.0);
        let elbo = value / k + log_std.iter().sum::<f64>() + entropy_const;
        if !elbo.is_finite() {
            return Err(Error::Divergence { step, trace });
        }
        trace.push(elbo);
        let mut x: Vec<f64> = mean.iter().chain(&log_std).copied().collect();
        adam.step(&mut x, &grad);
        mean.copy_from_slice(&x[..d]);
        log_std.copy_from_slice(&x[d..]);
    }
    let std: Vec<f64> = log_std.iter().map(|r| r.exp()).collect();
    let surrogate = PosteriorSurrogate::new(&problem.layout, mean, std)?;
    Ok(ViFit { converged: settled(&trace), surrogate, elbo_trace: trace })
}

/// Compares the means of the last two windows of a noisy ELBO trace.
fn settled(trace: &[f64]) -> bool {
    let w = (trace.len() / 10).max(5);
    if trace.len() < 2 * w {
        return false;
    }
    let last = &trace[trace.len() - w..];
    let prev = &trace[trace.len() - 2 * w..trace.len() - w];
    let mean = |s: &[f64]| s.iter().sum::<f64>() / s.len() as f64;
    let (ml, mp) = (mean(last), mean(prev));
    let sd = (last.iter().map(|v| (v - ml).powi(2)).sum::<f64>() / (w - 1) as f64).sqrt();
    (ml - mp).abs() <= 3.0 * sd / (w as f64).sqrt() + 1e-3 * ml.abs().max(1.0)
}
