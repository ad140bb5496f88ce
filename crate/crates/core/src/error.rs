use thiserror::Error;

/// Errors shared across the crate. Predicates report their findings as
/// values; only genuine contract violations become errors.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid schedule: {0}")]
    Schedule(String),
    #[error("illegal node: {0}")]
    IllegalNode(String),
    #[error("unregistered node id {0}")]
    Unregistered(String),
    #[error("invalid alpha-average: {0}")]
    InvalidAverage(String),
    #[error("invalid coding element: {0}")]
    InvalidCoding(String),
    #[error("subset not verified self-determined up to rank {0}")]
    UnverifiedSubset(u32),
    #[error("construction failed: {0}")]
    Construction(String),
    #[error("precondition violated: {0}")]
    Precondition(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
