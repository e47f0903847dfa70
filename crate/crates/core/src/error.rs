use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("no MTD curve inside the unit square: {0}")]
    NoCurve(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("sampler initialization failed: {0}")]
    Init(String),

    #[error("empty posterior chain")]
    EmptyChain,

    #[error("non-finite target density: {0}")]
    NonFinite(String),

    #[error("nothing to report: {0}")]
    EmptyReport(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
