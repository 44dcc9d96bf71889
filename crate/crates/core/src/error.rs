use thiserror::Error;

/// Errors surfaced by the simulation engines and diagnostics.
#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("out of range: {0}")]
    OutOfRange(String),

    /// A coefficient evaluated to a non-finite value, or a state blew up.
    /// Carries the step index and time so that discontinuous-coefficient
    /// failures are diagnosable.
    #[error("numeric failure at step {step} (t = {t}): {detail}")]
    NumericFailure { step: usize, t: f64, detail: String },

    /// An adapted coefficient rule violated its declared kappa bounds.
    #[error("coefficient bound violated at step {step}: {detail}")]
    BoundViolation { step: usize, detail: String },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate test-function family: {0}")]
    DegenerateFamily(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
