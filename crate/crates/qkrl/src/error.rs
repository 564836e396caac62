//! Crate-wide error type.

use std::fmt;

/// Errors raised by the simulator, estimators, and the harness.
#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A caller violated an operation contract (dimension mismatch,
    /// overlapping registers, unnormalized payload, ...).
    Contract(String),
    /// A value fell outside the representable range of a register.
    Range(String),
    /// Invalid or inconsistent configuration (bad MDP spec, qubit cap
    /// exceeded, register overflow, missing file).
    Config(String),
    /// A query budget or resource cap was exceeded.
    Budget(String),
    /// A linear solve failed (singular system).
    Solver(String),
    /// Two internal oracles that must agree did not.
    InternalConsistency(String),
    /// Filesystem or serialization failure in the harness.
    Io(String),
}

impl Error {
    pub fn contract(msg: impl Into<String>) -> Self {
        Error::Contract(msg.into())
    }
    pub fn range(msg: impl Into<String>) -> Self {
        Error::Range(msg.into())
    }
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
    pub fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }
    pub fn solver(msg: impl Into<String>) -> Self {
        Error::Solver(msg.into())
    }
    pub fn internal(msg: impl Into<String>) -> Self {
        Error::InternalConsistency(msg.into())
    }
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Contract(m) => write!(f, "contract violation: {m}"),
            Error::Range(m) => write!(f, "range error: {m}"),
            Error::Config(m) => write!(f, "config error: {m}"),
            Error::Budget(m) => write!(f, "budget error: {m}"),
            Error::Solver(m) => write!(f, "solver error: {m}"),
            Error::InternalConsistency(m) => write!(f, "internal consistency error: {m}"),
            Error::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for Error {}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
