use thiserror::Error;

/// Errors raised anywhere in the scheme.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("parse error in `{field}`: {msg}")]
    Parse { field: String, msg: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid instance: {0}")]
    Instance(String),

    #[error("schedule incomplete: unfinished jobs {0:?}")]
    Incomplete(Vec<String>),

    #[error("precision error: {0}")]
    Precision(String),

    #[error("safety net infeasible: increase s (minimal feasible s = {suggested_s})")]
    SafetyNet { suggested_s: i64 },

    #[error("refused: {0}")]
    Refused(String),

    #[error("map incomplete at key {0}")]
    MapIncomplete(String),

    #[error("no end-configurations")]
    NoEndConfigurations,

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("io error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for compute refusals (caps exceeded), which the CLI maps to exit code 2.
    pub fn is_refusal(&self) -> bool {
        matches!(self, Error::Refused(_))
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}
