//! Multi-resolution structural state space models for traffic forecasting.
//!
//! Monitoring systems such as MRTG keep recent traffic at full resolution and
//! progressively average older samples into coarser bands. This crate fits a
//! single structural linear-Gaussian model to all bands at once: each coarse
//! band is described exactly by a lifted version of the fine model
//! ([`aggregation::aggregate_model`]), filtered, and bridged into the fine
//! resolution from which forecasts are produced.
//!
//! Module map:
//!
//! * [`lgssm`]: model representation, Kalman filter, forecasting, joint moments.
//! * [`structural`]: trend / harmonic / AR blocks and their assembly.
//! * [`aggregation`]: series averaging and the lifted aggregated model.
//! * [`inference`]: priors, joint likelihood, MAP and variational fits, forecasts.
//! * [`ingest`]: MRTG log and CSV parsing, dataset layout, log-domain wrapping.
//! * [`eval`]: expected MAE, holdout log-likelihood, reports.
//! * [`synth`]: seeded synthetic traffic used by the CLI and test suites.

pub mod aggregation;
pub mod error;
pub mod eval;
pub mod inference;
pub mod ingest;
pub mod lgssm;
pub mod series;
pub mod structural;
pub mod synth;

pub use error::{Error, Result};
pub use lgssm::{GaussianBelief, StateSpaceModel};
pub use series::{AggregationMode, TimeSeries};
pub use structural::{Params, StructuralSpec};
