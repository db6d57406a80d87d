use thiserror::Error;

/// Errors raised anywhere in the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDist(String),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid field `{field}`: {reason}")]
    Validation { field: String, reason: String },
    #[error("enumeration budget exceeded: {needed} outcomes requested, budget is {budget}")]
    Budget { needed: f64, budget: f64 },
    #[error("axis `{0}` not present")]
    MissingAxis(String),
    #[error("support of P is not contained in support of Q at index {0}")]
    AbsoluteContinuity(usize),
    #[error("state constraint not supported here: {0}")]
    UnsupportedConstraint(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("no symmetrizing kernel: {0}")]
    NoKernel(String),
    #[error("iteration did not converge after {0} iterations")]
    NonConvergence(usize),
    #[error("linear program is unbounded")]
    Unbounded,
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("structure violation: {0}")]
    Structure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn validation(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Validation {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by malformed or inconsistent input.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::InvalidDist(_)
                | Error::Dimension(_)
                | Error::Validation { .. }
                | Error::MissingAxis(_)
                | Error::AbsoluteContinuity(_)
                | Error::Json(_)
                | Error::Structure(_)
        )
    }

    pub fn is_budget(&self) -> bool {
        matches!(self, Error::Budget { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
