//! Seeded synthetic traffic with known parameters.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::aggregation::{aggregate_series, FloorPolicy};
use crate::error::{Error, Result};
use crate::ingest::{build_dataset, MultiScaleDataset};
use crate::lgssm::simulate;
use crate::series::{AggregationMode, TimeSeries};
use crate::structural::{assemble, ArParams, InitialState, Params, Seasonality, StructuralSpec, TrendParams};

/// 2020-09-13T12:26:40Z, an arbitrary fixed origin.
pub const DEFAULT_START: i64 = 1_600_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub spec: StructuralSpec,
    pub truth: Params,
    /// Distribution the first latent state is drawn from.
    pub initial: InitialState,
    /// Coarse samples preceding the fine span.
    pub coarse_steps: usize,
    /// Fine samples at the end, holdout included.
    pub fine_steps: usize,
    pub ratio: usize,
    pub coarse_mode: AggregationMode,
    /// Simulated values are logs of the traffic.
    pub multiplicative: bool,
    pub start: i64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticData {
    /// The whole simulated span at fine resolution.
    pub underlying: TimeSeries,
    pub coarse: TimeSeries,
    pub fine: TimeSeries,
    pub truth: Params,
}

impl SyntheticData {
    pub fn dataset(&self, holdout_steps: usize) -> Result<MultiScaleDataset> {
        let mut series = vec![self.fine.clone()];
        if !self.coarse.is_empty() {
            series.push(self.coarse.clone());
        }
        build_dataset(series, self.fine.step_seconds, holdout_steps)
    }
}

impl SyntheticConfig {
    /// Daily and weekly seasonality at 30 minutes: 600 two-hour samples
    /// followed by 600 half-hour samples.
    pub fn paper_shape(harmonics: u32) -> Self {
        let spec = StructuralSpec {
            trend: true,
            seasonal: vec![Seasonality { period: 48, harmonics }, Seasonality { period: 336, harmonics }],
            ar: true,
            fine_step_seconds: 1800,
            per_harmonic_sigma: false,
        };
        Self {
            spec,
            truth: Params {
                trend: Some(TrendParams { sigma_level: 0.3, sigma_slope: 0.002 }),
                seasonal_sigmas: vec![0.05, 0.05],
                ar: Some(ArParams { coef: 0.7, sigma: 3.0 }),
                sigma_obs: 2.0,
            },
            initial: InitialState {
                level_mean: 200.0,
                level_var: 25.0,
                slope_var: 1e-4,
                seasonal_var: 400.0,
                ar_mean: 0.0,
                ar_var: 9.0,
            },
            coarse_steps: 600,
            fine_steps: 600,
            ratio: 4,
            coarse_mode: AggregationMode::Arithmetic,
            multiplicative: false,
            start: DEFAULT_START,
        }
    }

    /// Log-domain traffic: level around `e^5`, daily swing of about ±40%.
    pub fn multiplicative(harmonics: u32) -> Self {
        let base = Self::paper_shape(harmonics);
        Self {
            truth: Params {
                trend: Some(TrendParams { sigma_level: 0.01, sigma_slope: 1e-5 }),
                seasonal_sigmas: vec![0.002, 0.002],
                ar: Some(ArParams { coef: 0.7, sigma: 0.08 }),
                sigma_obs: 0.05,
            },
            initial: InitialState {
                level_mean: 5.0,
                level_var: 0.01,
                slope_var: 1e-8,
                seasonal_var: 0.09,
                ar_mean: 0.0,
                ar_var: 0.01,
            },
            coarse_mode: AggregationMode::Geometric,
            multiplicative: true,
            ..base
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.spec.validate()?;
        self.truth.validate(&self.spec)?;
        if self.ratio == 0 {
            return Err(Error::Parameter("ratio must be at least 1".into()));
        }
        if self.fine_steps == 0 {
            return Err(Error::Parameter("fine_steps must be at least 1".into()));
        }
        Ok(())
    }

    pub fn generate<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<SyntheticData> {
        self.validate()?;
        let model = assemble(&self.spec, &self.truth, &self.initial)?;
        let coarse_span = self.coarse_steps * self.ratio;
        let total = coarse_span + self.fine_steps;
        let sim = simulate(&model, total, rng)?;
        let step = self.spec.fine_step_seconds;
        let values: Vec<Option<f64>> = (0..total)
            .map(|t| {
                let y = sim.observations[(t, 0)];
                Some(if self.multiplicative { y.exp() } else { y })
            })
            .collect();
        let underlying = TimeSeries::new(self.start, step, values);
        let coarse = if self.coarse_steps == 0 {
            TimeSeries::new(self.start, step * self.ratio as u64, vec![]).with_mode(self.coarse_mode)
        } else {
            aggregate_series(&underlying.slice(0..coarse_span), self.ratio, self.coarse_mode, FloorPolicy::Auto)?.series
        };
        let fine = underlying.slice(coarse_span..total);
        Ok(SyntheticData { underlying, coarse, fine, truth: self.truth.clone() })
    }
}
