use thiserror::Error;

pub const EXIT_OTHER: i32 = 1;
/// Unreadable or invalid config, loss file or profile name.
pub const EXIT_INPUT: i32 = 2;
/// A family could not be fitted to the losses.
pub const EXIT_FIT: i32 = 3;
/// Too few bootstrap replications converged.
pub const EXIT_CONVERGENCE: i32 = 4;
/// A bootstrap matrix needed by a later stage is missing.
pub const EXIT_MISSING: i32 = 5;

#[derive(Debug, Error)]
#[error("{message}")]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn new(code: i32, message: impl Into<String>) -> Self {
        CliError { code, message: message.into() }
    }

    pub fn config(message: impl Into<String>) -> Self {
        Self::new(EXIT_INPUT, message)
    }

    pub fn io(what: &str, path: &std::path::Path, e: impl std::fmt::Display) -> Self {
        Self::new(EXIT_OTHER, format!("{what} {}: {e}", path.display()))
    }

    /// Maps a library error raised in `context` to an exit code.
    pub fn from_core(context: &str, e: sevfit_core::Error) -> Self {
        use sevfit_core::Error as E;
        let code = match &e {
            E::TooFewConverged { .. } => EXIT_CONVERGENCE,
            E::Parse(_) => EXIT_INPUT,
            _ => EXIT_OTHER,
        };
        Self::new(code, format!("{context}: {e}"))
    }
}
