use thiserror::Error;

/// Failure modes shared by every numerical routine in the crate.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected} values, found {found}")]
    Dimension { expected: usize, found: usize },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("{what} did not converge after {iterations} iterations (residual {residual:.3e})")]
    Convergence {
        what: &'static str,
        iterations: usize,
        residual: f64,
    },

    #[error("degenerate direction: {0}")]
    DegenerateDirection(String),

    #[error("numerical failure: {0}")]
    Numeric(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown {kind} `{name}` (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },
}

impl Error {
    /// Short machine-readable tag written to CSV rows when a task fails.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Precondition(_) => "precondition",
            Error::Convergence { .. } => "convergence",
            Error::DegenerateDirection(_) => "degenerate_direction",
            Error::Numeric(_) => "numeric",
            Error::Domain(_) => "domain",
            Error::UnknownStrategy { .. } => "unknown_strategy",
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
