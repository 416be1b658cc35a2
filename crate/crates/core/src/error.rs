//! Crate-wide error type.

use std::fmt;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A configuration value violates its contract.
    InvalidConfig(String),
    /// Geometry or probe placement outside the permitted region.
    OutOfDomain(String),
    /// Two records that must share metadata (dt, length, position) do not.
    RecordMismatch(String),
    /// The field solver produced a non-finite value.
    Numerical(String),
    /// A requested recording exceeds the configured memory budget.
    MemoryBudget(String),
    /// Malformed or incompatible file content.
    Format(String),
    Io(String),
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::InvalidConfig(m) => write!(f, "invalid configuration: {m}"),
            Error::OutOfDomain(m) => write!(f, "out of domain: {m}"),
            Error::RecordMismatch(m) => write!(f, "record mismatch: {m}"),
            Error::Numerical(m) => write!(f, "numerical failure: {m}"),
            Error::MemoryBudget(m) => write!(f, "memory budget exceeded: {m}"),
            Error::Format(m) => write!(f, "format error: {m}"),
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
