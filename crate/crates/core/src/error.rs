use thiserror::Error;

use crate::family::SeverityFamily;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid {family} parameters: {reason}")]
    InvalidParameters {
        family: SeverityFamily,
        reason: String,
    },

    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("{family} fit did not converge: {reason}")]
    NoConvergence {
        family: SeverityFamily,
        reason: String,
    },

    #[error("objective is not finite at the start point")]
    InvalidStart,

    #[error("Fisher information is not positive definite")]
    SingularInformation,

    #[error("sample covariance is singular")]
    SingularCovariance,

    #[error("only {converged} of {requested} replications converged for {family} at n = {n}")]
    TooFewConverged {
        family: SeverityFamily,
        n: usize,
        requested: usize,
        converged: usize,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn precondition(msg: impl Into<String>) -> Self {
        Error::Precondition(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateSample(msg.into())
    }

    /// True for the per-replication failures the bootstrap drops and counts.
    pub fn is_replication_failure(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::DegenerateSample(_))
    }
}
