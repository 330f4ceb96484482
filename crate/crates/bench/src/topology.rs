//! Cache and CPU topology: detected from the OS where possible, overridable
//! from configuration, never guessed silently.
//!
//! The cache boundaries place the annotation lines on size-sweep plots and
//! size the out-of-cache arrays (streaming baselines and the auto-tuner use
//! four times the last-level cache).

use crate::error::BenchError;
use std::fs;
use std::path::Path;

/// Per-core L1/L2 and shared last-level cache sizes plus core counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CacheTopology {
    pub l1_bytes: u64,
    pub l2_bytes: u64,
    pub l3_bytes: u64,
    /// Physical cores.
    pub core_count: usize,
    /// Hardware threads (>= core_count).
    pub logical_cpu_count: usize,
}

impl CacheTopology {
    /// Construct with the invariant checks: all sizes positive and
    /// `l1 <= l2 <= l3`, counts positive.
    pub fn validated(
        l1_bytes: u64,
        l2_bytes: u64,
        l3_bytes: u64,
        core_count: usize,
        logical_cpu_count: usize,
    ) -> Result<CacheTopology, BenchError> {
        if l1_bytes == 0 || l1_bytes > l2_bytes || l2_bytes > l3_bytes {
            return Err(BenchError::InvalidTopology { l1: l1_bytes, l2: l2_bytes, l3: l3_bytes });
        }
        if core_count == 0 || logical_cpu_count == 0 {
            return Err(BenchError::InvalidConfig(format!(
                "core counts must be positive, got cores={core_count} logical={logical_cpu_count}"
            )));
        }
        Ok(CacheTopology { l1_bytes, l2_bytes, l3_bytes, core_count, logical_cpu_count })
    }

    /// The out-of-cache working-set rule used throughout: four times the
    /// last-level cache.
    pub fn out_of_cache_bytes(&self) -> u64 {
        4 * self.l3_bytes
    }
}

/// Explicit values that take precedence over OS detection. Any field left
/// `None` must be detectable, or topology construction fails.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct TopologyOverrides {
    pub l1_bytes: Option<u64>,
    pub l2_bytes: Option<u64>,
    pub l3_bytes: Option<u64>,
    pub core_count: Option<usize>,
    pub logical_cpu_count: Option<usize>,
}

impl TopologyOverrides {
    pub fn is_complete(&self) -> bool {
        self.l1_bytes.is_some()
            && self.l2_bytes.is_some()
            && self.l3_bytes.is_some()
            && self.core_count.is_some()
            && self.logical_cpu_count.is_some()
    }
}

/// Detect the cache topology, with `overrides` taking precedence per field.
/// Fields that are neither overridden nor detectable produce an explicit
/// error naming what is missing.
pub fn detect_cache_topology(overrides: &TopologyOverrides) -> Result<CacheTopology, BenchError> {
    let detected = detect_from_os();
    let mut missing = Vec::new();
    let mut pick = |name: &'static str, over: Option<u64>, det: Option<u64>| match over.or(det) {
        Some(v) => v,
        None => {
            missing.push(name);
            0
        }
    };
    let l1 = pick("l1_bytes", overrides.l1_bytes, detected.l1_bytes);
    let l2 = pick("l2_bytes", overrides.l2_bytes, detected.l2_bytes);
    let l3 = pick("l3_bytes", overrides.l3_bytes, detected.l3_bytes);
    let cores = pick(
        "core_count",
        overrides.core_count.map(|c| c as u64),
        detected.core_count.map(|c| c as u64),
    );
    let logical = pick(
        "logical_cpu_count",
        overrides.logical_cpu_count.map(|c| c as u64),
        detected.logical_cpu_count.map(|c| c as u64),
    );
    if !missing.is_empty() {
        return Err(BenchError::TopologyUnavailable(format!(
            "could not determine {}; pass explicit override(s)",
            missing.join(", ")
        )));
    }
    CacheTopology::validated(l1, l2, l3, cores as usize, logical as usize)
}

/// Returns a human-readable warning when CPU frequency management looks
/// variable (non-`performance` governor or turbo boost enabled), since that
/// undermines measurement stability. `None` when the state looks pinned or
/// cannot be read.
pub fn frequency_scaling_warning() -> Option<String> {
    let mut concerns = Vec::new();
    if let Ok(gov) = fs::read_to_string("/sys/devices/system/cpu/cpu0/cpufreq/scaling_governor") {
        let gov = gov.trim();
        if !gov.is_empty() && gov != "performance" {
            concerns.push(format!("cpufreq governor is \"{gov}\" (not \"performance\")"));
        }
    }
    if let Ok(boost) = fs::read_to_string("/sys/devices/system/cpu/cpufreq/boost") {
        if boost.trim() == "1" {
            concerns.push("turbo boost is enabled".to_string());
        }
    }
    if let Ok(nt) = fs::read_to_string("/sys/devices/system/cpu/intel_pstate/no_turbo") {
        if nt.trim() == "0" {
            concerns.push("intel_pstate turbo is enabled".to_string());
        }
    }
    if concerns.is_empty() {
        None
    } else {
        Some(format!(
            "dynamic frequency scaling may be active ({}); timings can drift between repetitions",
            concerns.join("; ")
        ))
    }
}

#[derive(Default)]
struct DetectedTopology {
    l1_bytes: Option<u64>,
    l2_bytes: Option<u64>,
    l3_bytes: Option<u64>,
    core_count: Option<usize>,
    logical_cpu_count: Option<usize>,
}

fn detect_from_os() -> DetectedTopology {
    detect_from_sysfs(Path::new("/sys/devices/system/cpu")).unwrap_or_default()
}

/// Parse the Linux sysfs cpu tree. Returns `None` when the tree is absent
/// (non-Linux or restricted environments); individual fields may still be
/// `None` if their files are missing.
fn detect_from_sysfs(cpu_root: &Path) -> Option<DetectedTopology> {
    if !cpu_root.is_dir() {
        return None;
    }
    let mut out = DetectedTopology::default();

    // Cache sizes from cpu0's cache index directories. `size` strings look
    // like "48K" or "16384K"; level 1 has separate Data/Instruction entries.
    let cache_dir = cpu_root.join("cpu0/cache");
    if let Ok(entries) = fs::read_dir(&cache_dir) {
        for entry in entries.flatten() {
            let p = entry.path();
            let (Ok(level), Ok(ty), Ok(size)) = (
                fs::read_to_string(p.join("level")),
                fs::read_to_string(p.join("type")),
                fs::read_to_string(p.join("size")),
            ) else {
                continue;
            };
            let Some(bytes) = parse_size_string(size.trim()) else { continue };
            let ty = ty.trim();
            match (level.trim(), ty) {
                ("1", "Data") | ("1", "Unified") => out.l1_bytes = Some(bytes),
                ("2", "Data") | ("2", "Unified") => out.l2_bytes = Some(bytes),
                ("3", "Data") | ("3", "Unified") => out.l3_bytes = Some(bytes),
                _ => {}
            }
        }
    }

    // Logical CPUs from the "online" range list, e.g. "0-3,8-11".
    if let Ok(online) = fs::read_to_string(cpu_root.join("online")) {
        out.logical_cpu_count = parse_cpu_list(online.trim());
    }

    // Physical cores: unique (package, core) pairs across online CPUs.
    if let Some(logical) = out.logical_cpu_count {
        let mut pairs = std::collections::BTreeSet::new();
        let mut complete = true;
        if let Ok(entries) = fs::read_dir(cpu_root) {
            let mut seen = 0usize;
            for entry in entries.flatten() {
                let name = entry.file_name();
                let name = name.to_string_lossy();
                let Some(idx) = name.strip_prefix("cpu").and_then(|s| s.parse::<u64>().ok())
                else {
                    continue;
                };
                let _ = idx;
                let topo = entry.path().join("topology");
                let (Ok(pkg), Ok(core)) = (
                    fs::read_to_string(topo.join("physical_package_id")),
                    fs::read_to_string(topo.join("core_id")),
                ) else {
                    continue; // offline CPUs have no topology directory
                };
                let (Ok(pkg), Ok(core)) =
                    (pkg.trim().parse::<i64>(), core.trim().parse::<i64>())
                else {
                    complete = false;
                    continue;
                };
                pairs.insert((pkg, core));
                seen += 1;
            }
            if complete && seen >= logical && !pairs.is_empty() {
                out.core_count = Some(pairs.len());
            }
        }
    }
    Some(out)
}

/// Parse sysfs cache-size strings: a decimal count with an optional K/M/G
/// binary suffix.
fn parse_size_string(s: &str) -> Option<u64> {
    let s = s.trim();
    let (digits, mult) = match s.as_bytes().last()? {
        b'K' | b'k' => (&s[..s.len() - 1], 1024u64),
        b'M' | b'm' => (&s[..s.len() - 1], 1024 * 1024),
        b'G' | b'g' => (&s[..s.len() - 1], 1024 * 1024 * 1024),
        _ => (s, 1),
    };
    digits.trim().parse::<u64>().ok()?.checked_mul(mult)
}

/// Count CPUs in a sysfs range list such as "0-3,5,8-11".
fn parse_cpu_list(s: &str) -> Option<usize> {
    let mut count = 0usize;
    for part in s.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        match part.split_once('-') {
            Some((lo, hi)) => {
                let lo: usize = lo.trim().parse().ok()?;
                let hi: usize = hi.trim().parse().ok()?;
                if hi < lo {
                    return None;
                }
                count += hi - lo + 1;
            }
            None => {
                let _: usize = part.parse().ok()?;
                count += 1;
            }
        }
    }
    if count == 0 {
        None
    } else {
        Some(count)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn overrides_echo_verbatim() {
        let over = TopologyOverrides {
            l1_bytes: Some(32 * 1024),
            l2_bytes: Some(1024 * 1024),
            l3_bytes: Some(8_650_752),
            core_count: Some(6),
            logical_cpu_count: Some(12),
        };
        let topo = detect_cache_topology(&over).unwrap();
        assert_eq!(topo.l1_bytes, 32_768);
        assert_eq!(topo.l2_bytes, 1_048_576);
        assert_eq!(topo.l3_bytes, 8_650_752);
        assert_eq!(topo.core_count, 6);
        assert_eq!(topo.logical_cpu_count, 12);
        assert_eq!(topo.out_of_cache_bytes(), 4 * 8_650_752);
    }

    #[test]
    fn ordering_invariant_is_enforced() {
        let err = CacheTopology::validated(64 * 1024, 32 * 1024, 1 << 23, 1, 1).unwrap_err();
        assert!(matches!(err, BenchError::InvalidTopology { .. }), "{err}");
        assert!(CacheTopology::validated(0, 1, 2, 1, 1).is_err());
        assert!(CacheTopology::validated(1, 1, 1, 1, 1).is_ok(), "equal sizes are allowed");
        assert!(CacheTopology::validated(1, 2, 3, 0, 1).is_err());
    }

    #[test]
    fn size_strings_parse_with_binary_suffixes() {
        assert_eq!(parse_size_string("48K"), Some(49_152));
        assert_eq!(parse_size_string("307200K"), Some(307_200 * 1024));
        assert_eq!(parse_size_string("8M"), Some(8 * 1024 * 1024));
        assert_eq!(parse_size_string("1G"), Some(1 << 30));
        assert_eq!(parse_size_string("12345"), Some(12_345));
        assert_eq!(parse_size_string(""), None);
        assert_eq!(parse_size_string("xK"), None);
    }

    #[test]
    fn cpu_lists_parse_ranges_and_singles() {
        assert_eq!(parse_cpu_list("0"), Some(1));
        assert_eq!(parse_cpu_list("0-3"), Some(4));
        assert_eq!(parse_cpu_list("0-3,5,8-11"), Some(9));
        assert_eq!(parse_cpu_list(""), None);
        assert_eq!(parse_cpu_list("3-1"), None);
    }

    #[test]
    fn missing_fields_are_an_explicit_error() {
        // Force the no-detection path by pointing at a nonexistent tree and
        // giving an incomplete override set.
        assert!(detect_from_sysfs(Path::new("/nonexistent/cpu/tree")).is_none());
        let over = TopologyOverrides { l1_bytes: Some(1024), ..Default::default() };
        if detect_from_os().l2_bytes.is_none() {
            let err = detect_cache_topology(&over).unwrap_err();
            let msg = err.to_string();
            assert!(msg.contains("l2_bytes"), "{msg}");
        }
    }

    #[test]
    fn detection_works_on_linux_sysfs_when_present() {
        if !Path::new("/sys/devices/system/cpu/cpu0/cache").is_dir() {
            return; // nothing to assert on this platform
        }
        let topo = detect_cache_topology(&TopologyOverrides::default()).unwrap();
        assert!(topo.l1_bytes <= topo.l2_bytes && topo.l2_bytes <= topo.l3_bytes);
        assert!(topo.core_count >= 1 && topo.logical_cpu_count >= topo.core_count);
    }
}
