//! Crate-wide error type.

use thiserror::Error;

/// Errors surfaced by the engine. The variants map onto the CLI exit-code
/// contract: `Config`/`Usage` are caller mistakes, `Numeric` means a
/// computation produced a non-finite or otherwise invalid value.
#[derive(Debug, Error)]
pub enum Error {
    /// Invalid configuration (bad file, bad key, inconsistent values).
    #[error("config error: {0}")]
    Config(String),

    /// An operation was called outside its contract.
    #[error("usage error: {0}")]
    Usage(String),

    /// A numeric computation failed (NaN/Inf or divergence), with context.
    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
