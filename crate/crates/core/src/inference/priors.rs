use serde::{Deserialize, Serialize};

use super::transform::{ParamKind, ParamLayout};
use crate::error::{Error, Result};
use crate::ingest::MultiScaleDataset;
use crate::structural::InitialState;

/// Observations averaged for the data-driven initial level.
pub const LEVEL_CENTERING_SAMPLES: usize = 24;

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Normal prior on an initial state; a missing mean is resolved from data.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatePrior {
    #[serde(default)]
    pub mean: Option<f64>,
    pub var: f64,
}

/// `log(sigma) ~ N(loc, var)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogNormalPrior {
    pub loc: f64,
    pub var: f64,
}

impl LogNormalPrior {
    fn log_density_of_log(&self, u: f64) -> f64 {
        -0.5 * (LN_2PI + self.var.ln() + (u - self.loc).powi(2) / self.var)
    }
}

/// Independent priors on initial states and noise parameters.
///
/// The AR coefficient always has a standard normal prior truncated to
/// `(-1, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PriorSet {
    pub level: StatePrior,
    pub slope_var: f64,
    pub seasonal_var: f64,
    pub ar_state: StatePrior,
    pub sigma_level: LogNormalPrior,
    pub sigma_slope: LogNormalPrior,
    pub sigma_ar: LogNormalPrior,
    pub sigma_seasonal: LogNormalPrior,
    pub sigma_obs: LogNormalPrior,
}

impl Default for PriorSet {
    /// Literal hyperparameters, except that the initial level is centred on
    /// the data and the initial AR state on zero.
    fn default() -> Self {
        Self { level: StatePrior { mean: None, var: 5e5 }, ar_state: StatePrior { mean: None, var: 5e5 }, ..Self::paper() }
    }
}

impl PriorSet {
    /// Hyperparameters exactly as published for 30-minute downlink traffic.
    pub fn paper() -> Self {
        let wide = LogNormalPrior { loc: 2.8, var: 3.0 };
        let narrow = LogNormalPrior { loc: 1.2, var: 3.0 };
        Self {
            level: StatePrior { mean: Some(-219.0), var: 5e5 },
            slope_var: 1e5,
            seasonal_var: 3e5,
            ar_state: StatePrior { mean: Some(-219.0), var: 5e5 },
            sigma_level: wide,
            sigma_slope: wide,
            sigma_ar: wide,
            sigma_seasonal: narrow,
            sigma_obs: narrow,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let vars = [
            self.level.var,
            self.slope_var,
            self.seasonal_var,
            self.ar_state.var,
            self.sigma_level.var,
            self.sigma_slope.var,
            self.sigma_ar.var,
            self.sigma_seasonal.var,
            self.sigma_obs.var,
        ];
        if vars.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::Parameter("prior variances must be positive and finite".into()));
        }
        Ok(())
    }

    /// Resolves data-driven means against `dataset`.
    pub fn initial_state(&self, dataset: &MultiScaleDataset) -> InitialState {
        let level_mean = self.level.mean.unwrap_or_else(|| {
            let first = dataset.first_observations(LEVEL_CENTERING_SAMPLES);
            if first.is_empty() {
                0.0
            } else {
                first.iter().sum::<f64>() / first.len() as f64
            }
        });
        InitialState {
            level_mean,
            level_var: self.level.var,
            slope_var: self.slope_var,
            seasonal_var: self.seasonal_var,
            ar_mean: self.ar_state.mean.unwrap_or(0.0),
            ar_var: self.ar_state.var,
        }
    }

    fn scale_prior(&self, kind: ParamKind) -> &LogNormalPrior {
        match kind {
            ParamKind::SigmaLevel => &self.sigma_level,
            ParamKind::SigmaSlope => &self.sigma_slope,
            ParamKind::SigmaSeasonal(_) => &self.sigma_seasonal,
            ParamKind::SigmaAr => &self.sigma_ar,
            ParamKind::SigmaObs | ParamKind::ArCoef => &self.sigma_obs,
        }
    }

    /// Log prior density of the unconstrained coordinates, Jacobian included.
    pub fn log_density(&self, layout: &ParamLayout, u: &[f64]) -> f64 {
        layout
            .kinds()
            .iter()
            .zip(u)
            .map(|(&kind, &x)| match kind {
                ParamKind::ArCoef => truncated_coef_log_density(x),
                _ => self.scale_prior(kind).log_density_of_log(x),
            })
            .sum()
    }

    /// Prior centre in unconstrained space: `log sigma = loc`, `alpha = 0`.
    pub fn center(&self, layout: &ParamLayout) -> Vec<f64> {
        layout
            .kinds()
            .iter()
            .map(|&k| match k {
                ParamKind::ArCoef => 0.0,
                _ => self.scale_prior(k).loc,
            })
            .collect()
    }

    /// Prior standard deviation per unconstrained coordinate (approximate for
    /// the AR coefficient).
    pub fn scales(&self, layout: &ParamLayout) -> Vec<f64> {
        layout
            .kinds()
            .iter()
            .map(|&k| match k {
                ParamKind::ArCoef => 1.0,
                _ => self.scale_prior(k).var.sqrt(),
            })
            .collect()
    }
}

/// Density of `u = atanh(alpha)` for `alpha ~ N(0, 1)` truncated to `(-1, 1)`.
fn truncated_coef_log_density(u: f64) -> f64 {
    let alpha = u.tanh();
    // mass of N(0,1) on (-1, 1)
    let mass = statrs::function::erf::erf(std::f64::consts::FRAC_1_SQRT_2);
    // log(1 - tanh^2 u) = 2 (ln 2 - |u| - ln(1 + e^{-2|u|}))
    let a = u.abs();
    let log_jac = 2.0 * (std::f64::consts::LN_2 - a - (-2.0 * a).exp().ln_1p());
    -0.5 * (LN_2PI + alpha * alpha) - mass.ln() + log_jac
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::series::TimeSeries;
    use crate::structural::StructuralSpec;

    #[test]
    fn paper_values() {
        let p = PriorSet::paper();
        assert_eq!(p.level.mean, Some(-219.0));
        assert_eq!(p.level.var, 5e5);
        assert_eq!(p.slope_var, 1e5);
        assert_eq!(p.seasonal_var, 3e5);
        assert_eq!((p.sigma_level.loc, p.sigma_slope.loc, p.sigma_ar.loc), (2.8, 2.8, 2.8));
        assert_eq!((p.sigma_seasonal.loc, p.sigma_obs.loc), (1.2, 1.2));
        assert!([p.sigma_level.var, p.sigma_obs.var].iter().all(|v| *v == 3.0));
    }

    #[test]
    fn data_driven_level() {
        let values: Vec<f64> = (0..100).map(|i| i as f64).collect();
        let ds = MultiScaleDataset::new(vec![TimeSeries::from_values(0, 1800, &values)], None).unwrap();
        let init = PriorSet::default().initial_state(&ds);
        assert_eq!(init.level_mean, 11.5);
        assert_eq!(init.ar_mean, 0.0);
        assert_eq!(PriorSet::paper().initial_state(&ds).level_mean, -219.0);
    }

    #[test]
    fn truncated_density_integrates_to_one() {
        // trapezoid over u
        let h = 1e-3;
        let total: f64 = (-20_000..=20_000).map(|i| truncated_coef_log_density(i as f64 * h).exp() * h).sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn lognormal_prior_is_normal_in_log_space() {
        let layout = ParamLayout::new(&StructuralSpec {
            trend: false,
            seasonal: vec![],
            ar: false,
            fine_step_seconds: 60,
            per_harmonic_sigma: false,
        });
        let p = PriorSet::paper();
        let at_loc = p.log_density(&layout, &[1.2]);
        assert!((at_loc + 0.5 * (LN_2PI + 3f64.ln())).abs() < 1e-12);
        assert_eq!(p.center(&layout), vec![1.2]);
    }
}
