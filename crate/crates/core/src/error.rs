use thiserror::Error;

/// Errors produced by the simulator, readout and task generators.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain an operation is defined on.
    #[error("domain error: {0}")]
    Domain(String),

    /// Inconsistent shapes or otherwise invalid use of an API.
    #[error("usage error: {0}")]
    Usage(String),

    /// A configuration field failed validation.
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: String, reason: String },

    /// The reservoir state stopped being finite.
    #[error("numerical instability at step {step}: non-finite sideband amplitude")]
    Instability { step: usize },

    /// A metric is undefined for the supplied data (e.g. constant target).
    #[error("undefined metric: {0}")]
    Undefined(String),

    #[error("i/o error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    pub(crate) fn config(field: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            reason: reason.into(),
        }
    }

    /// True for errors caused by the numerics rather than by the caller.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Instability { .. } | Error::Undefined(_))
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
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
