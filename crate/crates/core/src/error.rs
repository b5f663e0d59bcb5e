use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate update at step {step}: {detail}")]
    DegenerateUpdate { step: usize, detail: String },

    #[error("numeric blow-up at step {step}: {detail}")]
    NumericBlowUp { step: usize, detail: String },

    #[error("no particle with cardinality {0}")]
    EmptyEstimate(usize),

    #[error("association count {count} exceeds bound {bound}")]
    ComplexityExceeded { count: u128, bound: u128 },

    #[error("bearing undefined at the observer position")]
    UndefinedBearing,

    #[error("all {runs} Monte Carlo runs failed; first error: {first}")]
    AllRunsFailed { runs: usize, first: String },

    #[error("i/o error: {0}")]
    Io(String),
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    /// True for errors that signal filter divergence rather than bad input.
    pub fn is_divergence(&self) -> bool {
        matches!(
            self,
            Error::DegenerateUpdate { .. } | Error::NumericBlowUp { .. } | Error::AllRunsFailed { .. }
        )
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::InvalidInput(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
