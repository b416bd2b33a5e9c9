use thiserror::Error;

/// Errors raised by the simulation engines and the command-line layer.
#[derive(Debug, Error)]
pub enum Error {
    /// An input violated a documented domain constraint.
    #[error("domain error in `{param}`: {reason}")]
    Domain { param: &'static str, reason: String },

    #[error("diffusion matrix is numerically singular (condition estimate {condition:e})")]
    SingularMatrix { condition: f64 },

    /// The clock loop needed more steps than the configured cap.
    #[error("step budget exceeded: {steps} steps taken, cap is {cap}")]
    BudgetExceeded { steps: usize, cap: usize },

    #[error("regression at time step {step} is ill-conditioned (condition estimate {condition:e})")]
    RegressionIllConditioned { step: usize, condition: f64 },

    /// Some units of a batch (e.g. surface nodes) failed; the rest were kept.
    #[error("{failed} of {total} estimates failed; first failure: {first}")]
    PartialFailure { failed: usize, total: usize, first: String },

    #[error("non-finite value in {what}")]
    NonFinite { what: &'static str },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(param: &'static str, reason: impl Into<String>) -> Self {
        Error::Domain {
            param,
            reason: reason.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
