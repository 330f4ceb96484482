//! Cache eviction for the measurement protocol: the output buffer is pushed
//! out of the cache hierarchy before every timed iteration (the input array
//! is deliberately left cached and is pre-touched once, outside timing).
//!
//! Two mechanisms, chosen once at harness construction and recorded in every
//! record:
//!
//! * **flush** — explicit per-cache-line flush instructions over the output
//!   buffer (x86-64).
//! * **thrash** — a streaming overwrite of a scratch buffer four times the
//!   last-level cache, displacing the output (and, unavoidably, everything
//!   else) on platforms without a usable flush instruction.

use crate::error::BenchError;
use crate::topology::CacheTopology;
use std::fmt;

/// Cache line granularity assumed by the flush loop. Universal on the
/// supported targets; a smaller true line size would only mean partially
/// redundant flushes, never a missed line.
const CACHE_LINE_BYTES: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvictionMode {
    Flush,
    Thrash,
}

impl fmt::Display for EvictionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EvictionMode::Flush => write!(f, "flush"),
            EvictionMode::Thrash => write!(f, "thrash"),
        }
    }
}

/// Owns the eviction mechanism (and the scratch buffer, in thrash mode).
pub struct Evictor {
    mode: EvictionMode,
    thrash: Vec<u8>,
}

impl Evictor {
    /// Pick the preferred mechanism for this build target: explicit flush
    /// where available, otherwise a thrash buffer sized to `4 * l3`.
    pub fn new(topology: &CacheTopology) -> Result<Evictor, BenchError> {
        if cfg!(target_arch = "x86_64") {
            Ok(Evictor { mode: EvictionMode::Flush, thrash: Vec::new() })
        } else {
            Self::with_mode(EvictionMode::Thrash, topology)
        }
    }

    /// Force a specific mechanism (the thrash path is exercised in tests on
    /// every platform this way).
    pub fn with_mode(mode: EvictionMode, topology: &CacheTopology) -> Result<Evictor, BenchError> {
        let thrash = match mode {
            EvictionMode::Flush => Vec::new(),
            EvictionMode::Thrash => {
                let bytes = topology.out_of_cache_bytes() as usize;
                let mut v = Vec::new();
                v.try_reserve_exact(bytes)
                    .map_err(|_| BenchError::Allocation { bytes: bytes as u64 })?;
                v.resize(bytes, 0u8);
                v
            }
        };
        Ok(Evictor { mode, thrash })
    }

    pub fn mode(&self) -> EvictionMode {
        self.mode
    }

    pub fn evict_f32(&mut self, data: &mut [f32]) {
        self.evict_bytes(data.as_mut_ptr().cast::<u8>(), std::mem::size_of_val(data));
    }

    pub fn evict_f64(&mut self, data: &mut [f64]) {
        self.evict_bytes(data.as_mut_ptr().cast::<u8>(), std::mem::size_of_val(data));
    }

    fn evict_bytes(&mut self, ptr: *mut u8, len: usize) {
        if len == 0 {
            return;
        }
        match self.mode {
            EvictionMode::Flush => flush_lines(ptr, len),
            EvictionMode::Thrash => {
                // One write per cache line of the scratch buffer allocates
                // its lines throughout the hierarchy, displacing the target.
                // Volatile stops the sweep from collapsing into nothing.
                let mut marker = 0u8;
                for chunk in self.thrash.chunks_mut(CACHE_LINE_BYTES) {
                    marker = marker.wrapping_add(1);
                    unsafe { std::ptr::write_volatile(chunk.as_mut_ptr(), marker) };
                }
            }
        }
    }
}

#[cfg(target_arch = "x86_64")]
fn flush_lines(ptr: *mut u8, len: usize) {
    use std::arch::x86_64::{_mm_clflush, _mm_mfence};
    // Align down to the start of the first line, then walk line by line.
    let start = (ptr as usize) & !(CACHE_LINE_BYTES - 1);
    let end = ptr as usize + len;
    let mut line = start;
    unsafe {
        _mm_mfence();
        while line < end {
            _mm_clflush(line as *const u8);
            line += CACHE_LINE_BYTES;
        }
        _mm_mfence();
    }
}

#[cfg(not(target_arch = "x86_64"))]
fn flush_lines(_ptr: *mut u8, _len: usize) {
    unreachable!("flush eviction is only constructed on x86_64");
}
