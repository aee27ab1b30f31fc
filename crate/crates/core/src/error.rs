use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed input data (files, ids, payloads).
    #[error("format error: {0}")]
    Format(String),

    /// Malformed input data with a known location.
    #[error("{source_name}:{line}: {message}")]
    Parse {
        source_name: String,
        line: u64,
        message: String,
    },

    /// A caller broke a documented precondition.
    #[error("contract violation: {0}")]
    Contract(String),

    /// A numeric argument outside the function's domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested quantity is undefined for the given input (e.g. a metric on no examples).
    #[error("undefined result: {0}")]
    Undefined(String),

    /// Offline evaluation found segments without a prediction.
    #[error("missing predictions for {} segment(s): {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    /// An experiment could not be set up as requested.
    #[error("setup error: {0}")]
    Setup(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }

    pub(crate) fn format(msg: impl Into<String>) -> Self {
        Error::Format(msg.into())
    }

    /// Process exit status for this error class: 2 data format, 3 contract violation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Format(_) | Error::Parse { .. } | Error::Coverage(_) | Error::Io(_) => 2,
            Error::Contract(_) | Error::Domain(_) | Error::Undefined(_) | Error::Setup(_) => 3,
        }
    }
}
