use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("station graph is disconnected ({components} components)")]
    Disconnected { components: usize },

    #[error("edge probabilities sum to {sum}, expected 1")]
    ProbabilitySum { sum: f64 },

    #[error("station {station}: {what} capacity {value} is negative")]
    NegativeCapacity {
        station: usize,
        what: &'static str,
        value: f64,
    },

    #[error("station {station}: F = {f} exceeds B + G = {bound}")]
    ChargerBound { station: usize, f: u64, bound: u64 },

    #[error("fluid integration failed at t = {t}: {reason}")]
    StepFailure { t: f64, reason: String },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("no replications")]
    NoReplications,

    #[error("stage `{stage}` failed: {cause}")]
    Stage { stage: String, cause: String },

    #[error("config parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::InvalidArgument(msg.into())
}
