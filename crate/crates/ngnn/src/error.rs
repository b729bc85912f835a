//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand shapes do not line up for an operation.
    #[error("dimension mismatch in {op}: left shape {left:?}, right shape {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },

    /// An internal contract was violated (e.g. backward on a non-scalar).
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A file did not match its documented layout.
    #[error("format error: {0}")]
    Format(String),

    #[error("lookup error: {0}")]
    Lookup(String),

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("generation error: {0}")]
    Generation(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("fit error: {0}")]
    Fit(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Stable one-word category, used by the CLI for machine-parsable exits.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Dimension { .. } => "dimension",
            Error::Contract(_) => "contract",
            Error::Config(_) => "config",
            Error::Ingestion(_) => "ingestion",
            Error::Format(_) => "format",
            Error::Lookup(_) => "lookup",
            Error::Sampling(_) => "sampling",
            Error::Generation(_) => "generation",
            Error::Training(_) => "training",
            Error::Fit(_) => "fit",
            Error::Io(_) => "io",
            Error::Json(_) => "json",
        }
    }
}
