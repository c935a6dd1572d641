use thiserror::Error;

/// Errors raised by the accounting library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A query lies outside the range that a sampled object covers.
    #[error("range error: {0}")]
    Range(String),

    /// A numerical routine did not reach its tolerance.
    #[error("numerical error: {message} (achieved {achieved:.3e})")]
    Numerical { message: String, achieved: f64 },

    /// A privacy profile still carries mass at the end of its γ-grid.
    #[error("γ-grid too short: H({gamma_max:.3e}) = {tail:.3e} exceeds tail tolerance {tail_tol:.1e}")]
    GridTooShort {
        gamma_max: f64,
        tail: f64,
        tail_tol: f64,
    },

    /// A theorem precondition is violated.
    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}

pub(crate) fn ensure_finite(name: &str, x: f64) -> Result<()> {
    if x.is_finite() {
        Ok(())
    } else {
        domain(format!("{name} must be finite, got {x}"))
    }
}
