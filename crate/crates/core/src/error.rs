use std::fmt;

/// Errors raised by the solver stages.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("integration failure: {0}")]
    Integration(String),
    #[error("contract violation: {0}")]
    Contract(String),
    #[error("grazing singularity: |v_b3| = {v_b3:e} below threshold")]
    Grazing { v_b3: f64 },
    #[error("backtrace failed at node {node}: {source}")]
    Node { node: usize, source: Box<Error> },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain(msg: impl fmt::Display) -> Error {
    Error::Domain(msg.to_string())
}

pub(crate) fn invalid(msg: impl fmt::Display) -> Error {
    Error::InvalidParameter(msg.to_string())
}
