//! Harness-level error type.

use crate::workload::Workload;
use std::fmt;
use std::io;

/// Everything that can go wrong while configuring or running a benchmark.
#[derive(Debug)]
pub enum BenchError {
    /// Cache topology could not be detected and no override was supplied.
    TopologyUnavailable(String),
    /// Detected or overridden cache sizes violate `l1 <= l2 <= l3` or are zero.
    InvalidTopology { l1: u64, l2: u64, l3: u64 },
    /// Buffer allocation failed (size in bytes that was requested).
    Allocation { bytes: u64 },
    /// The workload cannot run under the requested configuration
    /// (e.g. multi-threaded execution of a single-pass kernel).
    Unsupported { workload: Workload, threads: usize },
    /// A configuration field is out of its documented range.
    InvalidConfig(String),
    Io(io::Error),
    Core(softmax_core::Error),
}

impl fmt::Display for BenchError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchError::TopologyUnavailable(what) => {
                write!(f, "cache topology unavailable: {what}")
            }
            BenchError::InvalidTopology { l1, l2, l3 } => write!(
                f,
                "invalid cache topology: need 0 < l1 <= l2 <= l3, got l1={l1} l2={l2} l3={l3}"
            ),
            BenchError::Allocation { bytes } => {
                write!(f, "failed to allocate a {bytes}-byte benchmark buffer")
            }
            BenchError::Unsupported { workload, threads } => {
                write!(f, "workload {workload} does not support threads={threads}")
            }
            BenchError::InvalidConfig(msg) => write!(f, "invalid benchmark config: {msg}"),
            BenchError::Io(e) => write!(f, "i/o error: {e}"),
            BenchError::Core(e) => write!(f, "kernel error: {e}"),
        }
    }
}

impl std::error::Error for BenchError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            BenchError::Io(e) => Some(e),
            BenchError::Core(e) => Some(e),
            _ => None,
        }
    }
}

impl From<io::Error> for BenchError {
    fn from(e: io::Error) -> Self {
        BenchError::Io(e)
    }
}

impl From<softmax_core::Error> for BenchError {
    fn from(e: softmax_core::Error) -> Self {
        BenchError::Core(e)
    }
}
