//! Error type shared by every module in this crate.
//!
//! Each variant corresponds to a contract violation that callers can
//! meaningfully branch on; anything carrying a `String` holds extra context
//! for the message only, never data a caller is expected to parse.

use std::fmt;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Failure modes surfaced by the perception primitives.
#[derive(Debug)]
pub enum Error {
    /// An operation received an empty point cloud or empty collection.
    EmptyInput,
    /// Fewer than three distinct points survive deduplication, so
    /// two-neighbor statistics are undefined.
    InsufficientPoints,
    /// Every neighbor-distance ratio equals one; the dimension estimate
    /// would divide by zero.
    DegenerateRatios,
    /// The complexity signal fed to the router is NaN or infinite.
    InvalidComplexitySignal,
    /// A routing gradient was requested exactly at a path center, where
    /// the absolute value in the logit is not differentiable.
    NondifferentiablePoint,
    /// A matrix handed to the orthonormal retraction is numerically
    /// rank-deficient.
    RankDeficientUpdate,
    /// A message-passing update stayed rank-deficient after the step-size
    /// backoff retries were exhausted.
    DegenerateUpdate,
    /// An associative-memory key has zero norm.
    DegenerateKey,
    /// A read was issued against an empty short-term buffer.
    ColdStart,
    /// The requested agent count cannot be placed under the density cap.
    InfeasibleScene(String),
    /// Matrix or vector dimensions do not agree.
    DimensionMismatch(String),
    /// A configuration value is outside its documented domain.
    InvalidParameter(String),
    /// A file could not be read or written.
    Io(std::io::Error),
    /// A file was read but its contents violate the expected format.
    Format(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput => write!(f, "empty input"),
            Error::InsufficientPoints => write!(f, "insufficient points"),
            Error::DegenerateRatios => write!(f, "degenerate ratios"),
            Error::InvalidComplexitySignal => write!(f, "invalid complexity signal"),
            Error::NondifferentiablePoint => write!(f, "nondifferentiable point"),
            Error::RankDeficientUpdate => write!(f, "rank-deficient update"),
            Error::DegenerateUpdate => write!(f, "degenerate update"),
            Error::DegenerateKey => write!(f, "degenerate key"),
            Error::ColdStart => write!(f, "cold start"),
            Error::InfeasibleScene(why) => write!(f, "infeasible scene: {why}"),
            Error::DimensionMismatch(why) => write!(f, "dimension mismatch: {why}"),
            Error::InvalidParameter(why) => write!(f, "invalid parameter: {why}"),
            Error::Io(e) => write!(f, "io error: {e}"),
            Error::Format(why) => write!(f, "format error: {why}"),
        }
    }
}

impl std::error::Error for Error {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            Error::Io(e) => Some(e),
            _ => None,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e)
    }
}
