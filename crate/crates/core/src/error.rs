use thiserror::Error;

/// Unified error type for the whole library.
///
/// Variants map one-to-one onto the CLI exit codes: `Parse` -> 2,
/// `Domain`/`Validation`/`Precondition` -> 3, `CapExceeded`/`Inconclusive` -> 4,
/// `Accuracy` -> 5.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("validation error: {0}")]
    Validation(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    /// A numerical routine could not reach the requested tolerance.
    /// Carries the best estimate together with its error bound.
    #[error("accuracy target not met: {message} (best {best:e}, bound {bound:e})")]
    Accuracy {
        message: String,
        best: f64,
        bound: f64,
    },

    #[error("cap exceeded: {0}")]
    CapExceeded(String),

    #[error("inconclusive: {0}")]
    Inconclusive(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
