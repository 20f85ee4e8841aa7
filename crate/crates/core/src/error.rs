use thiserror::Error;

/// Errors raised by the model, estimators and file readers.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter lies outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A configuration or plan violates one of its invariants.
    #[error("invalid {field}: {reason}")]
    InvalidConfig { field: &'static str, reason: String },

    /// Estimator input is missing data or is degenerate.
    #[error("input error: {0}")]
    Input(String),

    /// A quantity cannot be estimated from the data (e.g. zero counts).
    #[error("estimation error: {0}")]
    Estimation(String),

    /// Calibration targets cannot be produced by the visibility model.
    #[error("calibration error: {0}")]
    Calibration(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("thread pool: {0}")]
    ThreadPool(#[from] rayon::ThreadPoolBuildError),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(field: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidConfig {
        field,
        reason: reason.into(),
    }
}
