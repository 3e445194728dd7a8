//! Priors, joint likelihood, MAP and variational fitting, and mixture
//! forecasts.

mod forecast;
mod likelihood;
mod map;
mod optimize;
mod posterior;
mod priors;
mod transform;
mod vi;

pub use forecast::{
    forecast, ForecastConfig, ForecastDistribution, Posterior, DEFAULT_FORECAST_SAMPLES, MIN_SUCCESS_FRACTION,
};
pub use likelihood::{fine_log_likelihood, joint_filter, joint_log_likelihood, JointFilterOutput, Problem};
pub use map::{data_start, fit_map, MapConfig, MapDiagnostics, MapFit};
pub use optimize::{nelder_mead, Adam, NelderMeadConfig, NelderMeadResult};
pub use posterior::{PosteriorFile, PosteriorFit, POSTERIOR_FORMAT_VERSION};
pub use priors::{LogNormalPrior, PriorSet, StatePrior, LEVEL_CENTERING_SAMPLES};
pub use transform::{ParamKind, ParamLayout, Transform};
pub use vi::{fit_vi, PosteriorSurrogate, ViConfig, ViFit};
