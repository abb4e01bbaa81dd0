use thiserror::Error;

use crate::solver::IterationRecord;

/// Errors raised by the numerical core.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected:?}, got {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("dimension error: {0}")]
    Dimension(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("backtracking exhausted after {} trials at outer iteration {}", .last.backtracks + 1, .last.k)]
    BacktrackExhausted { last: Box<IterationRecord> },

    #[error("empty trace")]
    EmptyTrace,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("malformed image file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_shape(expected: (usize, usize), found: (usize, usize)) -> Result<()> {
    if expected != found {
        return Err(Error::ShapeMismatch { expected, found });
    }
    Ok(())
}
