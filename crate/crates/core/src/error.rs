use thiserror::Error;

/// Errors produced by the library.
///
/// The variants map onto the CLI exit codes: configuration and validation
/// problems are `1`, capacity limits are `2`.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("validation failed: {0}")]
    Validation(String),

    #[error("capacity exceeded: {what} needs {needed}, limit is {limit}")]
    Capacity {
        what: &'static str,
        needed: u128,
        limit: u128,
    },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("grid point {index}: {source}")]
    GridPoint {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("bad expression `{expr}`: {reason}")]
    Expression { expr: String, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }

    /// True for errors caused by exceeding a documented size budget.
    pub fn is_capacity(&self) -> bool {
        match self {
            Error::Capacity { .. } => true,
            Error::GridPoint { source, .. } => source.is_capacity(),
            _ => false,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
