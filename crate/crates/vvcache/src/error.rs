//! Error types shared across the crate.

use thiserror::Error;

/// Invalid configuration values or combinations.
#[derive(Debug, Error)]
#[error("invalid configuration: {0}")]
pub struct ConfigError(String);

impl ConfigError {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Self(msg.into())
    }
}

/// Failures while reading a trajectory trace file.
#[derive(Debug, Error)]
pub enum TraceError {
    #[error("cannot read trace file {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("trace row {row}: {reason}")]
    Malformed { row: usize, reason: String },
    #[error("trajectory ({video}, {trajectory}) has {len} GOP entries, need at least {need}")]
    TooShort {
        video: u32,
        trajectory: u32,
        len: usize,
        need: usize,
    },
    #[error("trace file contains no trajectories")]
    Empty,
}

/// Contract violations inside the simulation environment. These indicate a
/// policy or harness bug rather than a recoverable condition.
#[derive(Debug, Error)]
pub enum EnvError {
    #[error("policy selected masked-out action index {0}")]
    MaskedAction(usize),
    #[error("cache action violates slot contract: {0}")]
    CacheContract(String),
    #[error("decision context requires workload invariant: {0}")]
    BadContext(String),
}
