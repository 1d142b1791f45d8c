use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument or configuration value outside its physical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// A protocol that cannot be executed (e.g. no imaging event).
    #[error("invalid sequence: {0}")]
    Sequence(String),

    #[error("config error: {0}")]
    Config(String),

    /// A malformed input file, anchored to the offending line (1-based).
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("visibility undefined: fitted mean {mean} is not positive")]
    VisibilityUndefined { mean: f64 },

    #[error("no peak: fitted amplitude {amplitude} is not positive")]
    NoPeak { amplitude: f64 },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    /// True for errors caused by user input rather than the numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Sequence(_) | Error::Config(_) | Error::Parse { .. } | Error::Io(_)
        )
    }
}
