use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller broke an operation's precondition (bad index, wrong env kind, ...).
    #[error("contract violation: {0}")]
    Contract(String),

    /// The operation needs data the caller did not supply.
    #[error("unsupported operation: {0}")]
    Unsupported(String),

    /// A definition or config file failed to parse or validate.
    #[error("line {line}: {message}")]
    Config { line: usize, message: String },

    /// A fit or numerical routine could not produce a meaningful answer.
    #[error("numerical error: {0}")]
    Numerical(String),

    /// An iterative solver ran out of budget before reaching its tolerance.
    #[error("not converged: gaps ({gap_max:.3e}, {gap_min:.3e})")]
    NotConverged { gap_max: f64, gap_min: f64 },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn contract(msg: impl Into<String>) -> Error {
    Error::Contract(msg.into())
}
