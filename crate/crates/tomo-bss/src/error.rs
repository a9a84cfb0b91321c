use thiserror::Error;

/// Library error type.
///
/// `InvalidInput` covers configuration and argument problems (bad geometry,
/// malformed config values); `DataFormat` covers unreadable or inconsistent
/// on-disk data; `NoSignal` is the benign "nothing to extract" outcome of the
/// separation loop, which callers usually map to an empty result rather than
/// a failure.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("data format error: {0}")]
    DataFormat(String),

    #[error("no significant signal component in input")]
    NoSignal,

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub fn format(msg: impl Into<String>) -> Self {
        Error::DataFormat(msg.into())
    }
}
