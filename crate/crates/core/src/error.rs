use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("points or balls live over different prime sets")]
    PrimeSetMismatch,
    #[error("place index {index} out of range ({places} places)")]
    PlaceOutOfRange { index: usize, places: usize },
    #[error("degenerate linear part {0}: use the involution/identity path")]
    DegenerateLinear(String),
    #[error("parameter out of range: {0}")]
    Parameter(String),
    #[error("invariant violation: {0}")]
    InvariantViolation(String),
    #[error("no legal escape: {0}")]
    NoEscape(String),
    #[error("search exceeds budget: {0}")]
    Budget(String),
    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
