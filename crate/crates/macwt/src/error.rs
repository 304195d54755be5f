use thiserror::Error;

/// Errors shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// A model object violates its invariants (bad law, bad distribution, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An operation was called with out-of-range or inconsistent arguments.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An exact enumeration would exceed the dense-state guard.
    #[error("enumeration guard exceeded: {support} states (limit {limit})")]
    CapacityExceeded { support: u128, limit: u128 },

    /// A slot plan violated the key-buffer state machine.
    #[error("protocol violation: {0}")]
    Protocol(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
