//! Error type shared by the kernel entry points.

use std::fmt;

/// Errors reported by kernel entry points and validators.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Error {
    /// An input vector of length zero was passed where at least one element is required.
    EmptyInput,
    /// Output slice length does not match the input slice length.
    LengthMismatch { expected: usize, got: usize },
    /// Thread count of zero requested.
    InvalidThreadCount,
    /// Tuning parameters outside the supported search space.
    InvalidTuning { unroll: usize, accumulators: usize },
    /// Sweep range is empty or contains NaN bounds.
    InvalidRange,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::EmptyInput => write!(f, "input vector is empty"),
            Error::LengthMismatch { expected, got } => {
                write!(f, "output length {got} does not match input length {expected}")
            }
            Error::InvalidThreadCount => write!(f, "thread count must be at least 1"),
            Error::InvalidTuning { unroll, accumulators } => write!(
                f,
                "tuning parameters (unroll={unroll}, accumulators={accumulators}) \
                 outside the supported search space"
            ),
            Error::InvalidRange => write!(f, "invalid range: lo must be <= hi and finite"),
        }
    }
}

impl std::error::Error for Error {}
