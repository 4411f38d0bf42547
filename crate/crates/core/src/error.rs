use thiserror::Error;

/// Errors raised by the simulation library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("profile normalization {weight} outside 1 ± {tolerance}")]
    Normalization { weight: f64, tolerance: f64 },

    #[error("numerical failure in {what} (residual {residual:e})")]
    Numeric { what: String, residual: f64 },

    #[error("conditional state has zero trace")]
    UndefinedState,

    #[error("jump intensity {value:e} is negative beyond roundoff")]
    ModelInconsistency { value: f64 },

    #[error("jump requested with intensity {intensity:e} at or below threshold")]
    ForbiddenJump { intensity: f64 },

    #[error("step too large: k·dt = {product} exceeds {limit}")]
    StepSize { product: f64, limit: f64 },

    #[error("trace drift {drift:e} at t = {time} exceeds {limit:e}")]
    Accuracy { drift: f64, time: f64, limit: f64 },

    #[error("not implemented: {0}")]
    NotImplemented(String),

    #[error("configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// Process exit code used by the CLI: 2 for validation problems, 3 for
    /// numerical or runtime failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Json(_) | Error::InvalidArgument(_) | Error::Normalization { .. } => 2,
            _ => 3,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
