use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    /// Malformed or inconsistent data (ragged rows, wrong column kinds, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("unknown {kind} '{name}'")]
    Unknown { kind: &'static str, name: String },

    #[error("duplicate {kind} '{name}'")]
    Duplicate { kind: &'static str, name: String },

    #[error("parameter error: {0}")]
    Param(String),

    #[error("learner '{learner}' does not support {what}")]
    Unsupported { learner: String, what: String },

    #[error("measure '{measure}' requires {missing}")]
    MeasureRequirement { measure: String, missing: String },

    #[error("learner '{learner}' failed: {message}")]
    LearnerFailed { learner: String, message: String },

    #[error("numerical error: {0}")]
    Numerical(String),
}

impl Error {
    pub(crate) fn data(msg: impl Into<String>) -> Self {
        Error::Data(msg.into())
    }

    pub(crate) fn arg(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    pub(crate) fn unknown(kind: &'static str, name: impl Into<String>) -> Self {
        Error::Unknown { kind, name: name.into() }
    }

    pub(crate) fn duplicate(kind: &'static str, name: impl Into<String>) -> Self {
        Error::Duplicate { kind, name: name.into() }
    }

    pub(crate) fn unsupported(learner: impl Into<String>, what: impl Into<String>) -> Self {
        Error::Unsupported { learner: learner.into(), what: what.into() }
    }

    pub(crate) fn numerical(msg: impl Into<String>) -> Self {
        Error::Numerical(msg.into())
    }
}
