use thiserror::Error;

/// Errors returned by this crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A model or belief failed a structural or numerical validity check.
    #[error("invalid model: {0}")]
    Validation(String),
    /// Two objects that must agree on a dimension do not.
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    /// The predicted observation covariance lost positive definiteness.
    #[error("numerical degeneracy at step {step}: {detail}")]
    Degenerate { step: usize, detail: String },
    /// A structural parameter is out of its admissible range.
    #[error("invalid parameter: {0}")]
    Parameter(String),
    /// A harmonic frequency outside (0, pi).
    #[error("harmonic frequency {0} outside (0, pi)")]
    Frequency(f64),
    /// AR coefficient with |alpha| >= 1.
    #[error("AR coefficient {0} is not stationary (|alpha| must be < 1)")]
    Stationarity(f64),
    /// A brute-force computation was asked to materialize too much.
    #[error("requested size {requested} exceeds limit {limit}")]
    Size { requested: usize, limit: usize },
    /// Values that cannot be processed, with the offending indices.
    #[error("{message} (indices: {indices:?})")]
    Data { message: String, indices: Vec<usize> },
    /// A multi-resolution dataset violates its layout invariants.
    #[error("invalid dataset: {0}")]
    Dataset(String),
    /// A text input could not be parsed.
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    /// Log-domain modelling requested on arithmetically aggregated data.
    #[error("aggregation mode conflict: {0}")]
    ModeConflict(String),
    /// The optimizer objective was not finite at the starting point.
    #[error("non-finite objective at initialization: {message}; parameters: {params}")]
    Initialization { message: String, params: String },
    /// Variational fitting produced a non-finite ELBO.
    #[error("ELBO diverged at step {step} (trace length {})", trace.len())]
    Divergence { step: usize, trace: Vec<f64> },
    /// Too many posterior samples failed during forecasting.
    #[error("forecast failed: {0}")]
    Forecast(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
