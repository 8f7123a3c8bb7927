//! Error type shared by the whole engine.
//!
//! Every failure is explicit: dimension or slot mismatches, singular Thomas-D
//! weights, poles during evaluation, violated preconditions, and inputs that
//! turn out not to be conformal Killing when an operation requires it.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected n={expected}, got n={got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("slot mismatch: {0}")]
    SlotMismatch(String),

    #[error("variable count mismatch: expected {expected}, got {got}")]
    NvarsMismatch { expected: usize, got: usize },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("Thomas-D operator is singular at weight w={w} for n={n} (n+2w-2=0)")]
    SingularWeight { n: usize, w: i64 },

    #[error("division by zero {0}")]
    DivisionByZero(String),

    #[error("pole: denominator vanishes at evaluation point")]
    PoleAtPoint,

    #[error("input is not conformal Killing: residual nonzero at {0}")]
    NotConformalKilling(String),

    #[error("precondition failed: {0}")]
    PreconditionFailed(String),

    #[error("internal consistency check failed: {0}")]
    InternalInconsistency(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Exit-code class used by the command line tool: usage/schema problems
    /// exit 2, mathematical check failures exit 1.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::Parse(_)
                | Error::Schema(_)
                | Error::Io(_)
                | Error::Json(_)
                | Error::NvarsMismatch { .. }
                | Error::DimensionMismatch { .. }
        )
    }
}
