use thiserror::Error;

/// Errors raised by the simulator library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    /// An argument lies outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A documented precondition of an operation does not hold.
    #[error("precondition violated: {0}")]
    Precondition(String),

    /// The exact engine would exceed its sub-branch population cap.
    #[error("exact-mode population cap of {cap} sub-branches exceeded; rerun in aggregated or hybrid mode")]
    Capacity { cap: usize },

    /// The scenario cannot be run in the requested engine mode.
    #[error("mode error: {0}")]
    Mode(String),

    /// An event was delivered at a time inconsistent with its target.
    #[error("scheduling corruption: {0}")]
    Scheduling(String),

    /// A conservation law or other runtime invariant was breached.
    #[error("invariant breach: {0}")]
    Invariant(String),

    /// A scenario or parameter set failed validation.
    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T> = std::result::Result<T, Error>;
