use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("solution diverged at t = {t}")]
    Divergence { t: f64 },

    #[error("degenerate pair: the two initial states coincide")]
    DegeneratePair,

    #[error("degenerate frame: {0}")]
    DegenerateFrame(String),

    #[error("volume underflow at t = {t}; use a shorter horizon or more frequent re-orthonormalization")]
    Underflow { t: f64 },

    #[error("characteristic function has a root on Re p = {line} (min |D| = {min_abs:e})")]
    BoundaryRoot { line: f64, min_abs: f64 },

    #[error("winding number {raw} is not resolved to an integer")]
    ContourResolution { raw: f64 },

    #[error("internal error: {0}")]
    Internal(String),
}

pub type Result<T> = std::result::Result<T, Error>;
