//! Kernel tuning knobs and their on-disk cache.
//!
//! Every batch kernel is parameterized by an unroll factor (in vector widths)
//! and, for reductions, an independent-accumulator count. The best pair per
//! kernel and machine is found by measurement and persisted in a small
//! human-editable text file of `kernel = unroll accumulators` lines.

use crate::error::Error;
use std::collections::BTreeMap;
use std::io::{self, Write as _};
use std::path::{Path, PathBuf};

/// Unroll factors the tuner searches, in vector widths.
pub const UNROLL_CANDIDATES: [usize; 6] = [1, 2, 4, 8, 16, 32];
/// Accumulator counts the tuner searches.
pub const ACCUMULATOR_CANDIDATES: [usize; 4] = [1, 2, 4, 8];
/// Upper bound of the accumulator search space (array sizing in kernels).
pub const MAX_ACCUMULATORS: usize = 8;

/// Environment variable overriding the tuning-cache file path.
pub const TUNING_FILE_ENV: &str = "SOFTMAX_TUNING_FILE";
/// Default tuning-cache file name (in the working directory).
pub const TUNING_FILE_DEFAULT: &str = "softmax-tuning.txt";

/// Loop shape for one kernel: elements are processed in blocks of
/// `unroll_factor` vector widths, reductions split across
/// `accumulator_count <= unroll_factor` independent accumulators.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub struct TuningParams {
    pub unroll_factor: usize,
    pub accumulator_count: usize,
}

impl TuningParams {
    /// Validated constructor: both factors must come from the search space and
    /// the accumulator count may not exceed the unroll factor.
    pub fn new(unroll_factor: usize, accumulator_count: usize) -> Result<Self, Error> {
        let ok = UNROLL_CANDIDATES.contains(&unroll_factor)
            && ACCUMULATOR_CANDIDATES.contains(&accumulator_count)
            && accumulator_count <= unroll_factor;
        if ok {
            Ok(TuningParams { unroll_factor, accumulator_count })
        } else {
            Err(Error::InvalidTuning { unroll: unroll_factor, accumulators: accumulator_count })
        }
    }
}

impl Default for TuningParams {
    fn default() -> Self {
        TuningParams { unroll_factor: 8, accumulator_count: 4 }
    }
}

/// Every valid `(unroll, accumulators)` pair, in deterministic order.
pub fn search_space() -> Vec<TuningParams> {
    let mut v = Vec::new();
    for &u in &UNROLL_CANDIDATES {
        for &a in &ACCUMULATOR_CANDIDATES {
            if a <= u {
                v.push(TuningParams { unroll_factor: u, accumulator_count: a });
            }
        }
    }
    v
}

/// Resolve the tuning-cache path: `SOFTMAX_TUNING_FILE` if set, else
/// `softmax-tuning.txt` in the working directory.
pub fn cache_path() -> PathBuf {
    match std::env::var_os(TUNING_FILE_ENV) {
        Some(p) if !p.is_empty() => PathBuf::from(p),
        _ => PathBuf::from(TUNING_FILE_DEFAULT),
    }
}

/// Parsed tuning cache: kernel name to its best parameters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TuningCache {
    entries: BTreeMap<String, TuningParams>,
}

impl TuningCache {
    /// Load from `path`. A missing file is an empty cache (kernels fall back
    /// to defaults); a malformed file is an explicit error, never a silent
    /// default.
    pub fn load(path: &Path) -> io::Result<TuningCache> {
        let text = match std::fs::read_to_string(path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(TuningCache::default()),
            Err(e) => return Err(e),
        };
        Self::parse(&text)
            .map_err(|msg| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {msg}", path.display())))
    }

    /// Parse the `kernel = unroll accumulators` line format.
    pub fn parse(text: &str) -> Result<TuningCache, String> {
        let mut entries = BTreeMap::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let err = |msg: &str| format!("line {}: {msg}: {raw:?}", lineno + 1);
            let (kernel, rest) = line.split_once('=').ok_or_else(|| err("missing '='"))?;
            let kernel = kernel.trim();
            let mut fields = rest.split_whitespace();
            let unroll: usize = fields
                .next()
                .ok_or_else(|| err("missing unroll factor"))?
                .parse()
                .map_err(|_| err("unroll factor is not a number"))?;
            let accumulators: usize = fields
                .next()
                .ok_or_else(|| err("missing accumulator count"))?
                .parse()
                .map_err(|_| err("accumulator count is not a number"))?;
            if fields.next().is_some() {
                return Err(err("trailing fields"));
            }
            let params = TuningParams::new(unroll, accumulators)
                .map_err(|_| err("parameters outside the search space"))?;
            if kernel.is_empty() {
                return Err(err("empty kernel name"));
            }
            entries.insert(kernel.to_string(), params);
        }
        Ok(TuningCache { entries })
    }

    /// Parameters for `kernel`, or the defaults when the kernel has no entry.
    pub fn get(&self, kernel: &str) -> TuningParams {
        self.entries.get(kernel).copied().unwrap_or_default()
    }

    pub fn set(&mut self, kernel: &str, params: TuningParams) {
        self.entries.insert(kernel.to_string(), params);
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, TuningParams)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), *v))
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Serialize to the documented text format.
    pub fn to_text(&self) -> String {
        let mut out = String::from(
            "# Kernel tuning cache. One entry per line:\n#   <kernel> = <unroll factor> <accumulator count>\n",
        );
        for (k, p) in &self.entries {
            out.push_str(&format!("{k} = {} {}\n", p.unroll_factor, p.accumulator_count));
        }
        out
    }

    /// Write atomically: a temp file in the target directory is renamed over
    /// `path`, so readers never observe a half-written cache.
    pub fn save(&self, path: &Path) -> io::Result<()> {
        let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
        let tmp = dir.join(format!(
            ".{}.tmp{}",
            path.file_name().and_then(|n| n.to_str()).unwrap_or("softmax-tuning"),
            std::process::id()
        ));
        {
            let mut f = std::fs::File::create(&tmp)?;
            f.write_all(self.to_text().as_bytes())?;
            f.sync_all()?;
        }
        std::fs::rename(&tmp, path)
    }
}
