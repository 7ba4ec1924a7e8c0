use alloc::string::String;
use core::fmt;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller-supplied value violates an operation's precondition.
    InvalidArgument(String),
    /// A configuration object (MCS table, layer rule, radio config) is inconsistent.
    Config(String),
    /// Cholesky factorization failed even after jitter escalation.
    NotPositiveDefinite { jitter: f64 },
    /// Every fitting restart failed.
    Fit(String),
    /// Nearest-neighbor pairing could not run.
    Pairing(String),
    /// A per-cell evaluation failed; carries the row-major cell index.
    Cell { index: usize, source: alloc::boxed::Box<Error> },
}

impl Error {
    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidArgument(m) => write!(f, "invalid argument: {m}"),
            Error::Config(m) => write!(f, "invalid configuration: {m}"),
            Error::NotPositiveDefinite { jitter } => {
                write!(f, "covariance not positive definite (last jitter {jitter:e})")
            }
            Error::Fit(m) => write!(f, "fit failed: {m}"),
            Error::Pairing(m) => write!(f, "pairing failed: {m}"),
            Error::Cell { index, source } => write!(f, "cell {index}: {source}"),
        }
    }
}

impl core::error::Error for Error {
    fn source(&self) -> Option<&(dyn core::error::Error + 'static)> {
        match self {
            Error::Cell { source, .. } => Some(source.as_ref()),
            _ => None,
        }
    }
}
