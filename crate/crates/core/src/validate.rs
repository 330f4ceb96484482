//! Accuracy validation: high-precision oracles, ULP metrology, and range
//! sweeps of the exponential kernel.
//!
//! The oracle computes in `f64`, which carries more than twice the
//! significand bits of `f32` (53 vs 24), so oracle rounding contributes well
//! under 2^-29 of a single-precision ULP and can be ignored at the
//! tolerances used here.

use crate::error::Error;
use crate::exp::exp;
use crate::parallel::chunk_ranges;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Reference `e^x` evaluated in double precision.
pub fn oracle_exp(x: f32) -> f64 {
    (x as f64).exp()
}

/// Reference softmax in double precision: max-shifted, with a compensated
/// (Neumaier) sum so the oracle's own accumulation error stays near one
/// `f64` ULP regardless of length.
pub fn oracle_softmax(x: &[f32]) -> Result<Vec<f64>, Error> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let mu = x.iter().fold(f64::NEG_INFINITY, |m, &v| m.max(v as f64));
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    for &v in x {
        let e = (v as f64 - mu).exp();
        let t = sum + e;
        comp += if sum.abs() >= e.abs() { (sum - t) + e } else { (e - t) + sum };
        sum = t;
    }
    let total = sum + comp;
    Ok(x.iter().map(|&v| (v as f64 - mu).exp() / total).collect())
}

/// Textbook softmax with no shifting and no extended range, kept as a
/// demonstration baseline: any element above `ln(f32::MAX) ~ 88.7` overflows
/// the sum to `+inf` and any all-small input underflows it to zero, so the
/// result degrades to NaN where the shipped algorithms stay finite. Not part
/// of the supported surface.
pub fn naive_softmax_unshifted(x: &[f32], y: &mut [f32]) -> Result<(), Error> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { expected: x.len(), got: y.len() });
    }
    let mut sigma = 0.0f32;
    for &v in x {
        sigma += exp(v);
    }
    for (v, yi) in x.iter().zip(y.iter_mut()) {
        *yi = exp(*v) / sigma;
    }
    Ok(())
}

/// Distance from an `f32` result to an `f64` reference, in units of the
/// `f32` ULP at the reference (fractional; 0.5 = correctly rounded bound).
///
/// Infinities compare equal at distance zero (saturation that matches the
/// reference is not an error); any other non-finite mismatch is `+inf`.
pub fn ulp_distance(value: f32, reference: f64) -> f64 {
    if value as f64 == reference {
        return 0.0;
    }
    if !value.is_finite() || !reference.is_finite() {
        return f64::INFINITY;
    }
    (value as f64 - reference).abs() / f32_ulp_at(reference)
}

/// Size of one `f32` ULP at `|r|`: `2^(floor(log2 |r|) - 23)` for the normal
/// range, the fixed subnormal spacing `2^-149` below it.
fn f32_ulp_at(r: f64) -> f64 {
    let a = r.abs();
    if a < 2f64.powi(-126) {
        return 2f64.powi(-149);
    }
    if a >= f32::MAX as f64 {
        return 2f64.powi(104);
    }
    let e = ((a.to_bits() >> 52) & 0x7FF) as i32 - 1023;
    2f64.powi(e - 23)
}

/// Number of representable `f32` values strictly between `a` and `b`, plus
/// one if they differ — i.e. steps along the ordered bit-pattern line.
/// `+0` and `-0` count as adjacent. NaN on either side saturates to `u64::MAX`.
pub fn ulp_between(a: f32, b: f32) -> u64 {
    if a.is_nan() || b.is_nan() {
        return u64::MAX;
    }
    (ordered(a) as i64 - ordered(b) as i64).unsigned_abs()
}

/// Below this magnitude (`2^-125`, twice the smallest normal `f32`) a result
/// sits in the underflow zone: the kernels' contracts allow flushing there
/// (the exponential flushes below the normal range, and rescaling paths may
/// flush subnormals), so two correct algorithms can differ by the entire
/// subnormal gap. Elementwise comparisons therefore treat any two values
/// inside the zone as agreeing.
pub const UNDERFLOW_ZONE: f32 = 2.350_988_7e-38;

/// Elementwise agreement: within `max_ulp` ordered steps, or both inside the
/// underflow zone where the flush contract makes the comparison moot.
pub fn outputs_agree(a: f32, b: f32, max_ulp: u64) -> bool {
    ulp_between(a, b) <= max_ulp || (a.abs() < UNDERFLOW_ZONE && b.abs() < UNDERFLOW_ZONE)
}

/// Monotone map from `f32` to `u32`: total order of floats becomes integer
/// order, with negatives mirrored below positives.
fn ordered(x: f32) -> u32 {
    let b = x.to_bits();
    if b & 0x8000_0000 != 0 {
        !b
    } else {
        b | 0x8000_0000
    }
}

fn from_ordered(o: u32) -> f32 {
    f32::from_bits(if o & 0x8000_0000 != 0 { o & 0x7FFF_FFFF } else { !o })
}

/// C99-style hexadecimal float formatting (`0x1.8p+0`), exact for every
/// finite `f32` and therefore round-trippable, unlike decimal output.
pub fn hex_f32(x: f32) -> String {
    if x.is_nan() {
        return "nan".to_string();
    }
    let sign = if x.is_sign_negative() { "-" } else { "" };
    if x.is_infinite() {
        return format!("{sign}inf");
    }
    let bits = x.to_bits();
    let exp_field = ((bits >> 23) & 0xFF) as i32;
    let mantissa = bits & 0x7F_FFFF;
    if exp_field == 0 && mantissa == 0 {
        return format!("{sign}0x0p+0");
    }
    let (lead, e) = if exp_field == 0 { (0, -126) } else { (1, exp_field - 127) };
    // 23 mantissa bits left-shifted to 24 give exactly six hex fraction digits.
    let frac = mantissa << 1;
    if frac == 0 {
        return format!("{sign}0x{lead}p{e:+}");
    }
    let mut digits = format!("{frac:06x}");
    while digits.len() > 1 && digits.ends_with('0') {
        digits.pop();
    }
    format!("{sign}0x{lead}.{digits}p{e:+}")
}

/// How a sweep covers its input range.
#[derive(Copy, Clone, Debug, PartialEq, Eq)]
pub enum SweepMode {
    /// Stratified random sampling: the range splits into `samples` equal
    /// strata with one uniformly jittered point each, so coverage is even
    /// while still exercising arbitrary mantissa patterns.
    Sampled { samples: u64 },
    /// Every representable `f32` in the range, in bit-pattern order.
    Exhaustive,
}

impl std::fmt::Display for SweepMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            SweepMode::Sampled { .. } => f.write_str("sampled"),
            SweepMode::Exhaustive => f.write_str("exhaustive"),
        }
    }
}

/// Summary of one accuracy sweep of the exponential kernel.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct UlpReport {
    pub lo: f32,
    pub hi: f32,
    pub mode: SweepMode,
    pub sample_count: u64,
    pub max_ulp: f64,
    pub mean_ulp: f64,
    /// Input that produced `max_ulp` (ties resolve to the smaller input).
    pub worst_input: f32,
}

impl UlpReport {
    pub fn csv_header() -> &'static str {
        "lo,hi,mode,sample_count,max_ulp,mean_ulp,worst_input"
    }

    pub fn csv_row(&self) -> String {
        format!(
            "{},{},{},{},{:.6},{:.6},{}",
            self.lo,
            self.hi,
            self.mode,
            self.sample_count,
            self.max_ulp,
            self.mean_ulp,
            hex_f32(self.worst_input)
        )
    }
}

/// Streaming per-worker statistics; merging is order-independent because
/// maxima tie-break on the smaller input.
struct Partial {
    count: u64,
    sum: f64,
    max: f64,
    worst: f32,
}

impl Partial {
    fn new() -> Partial {
        Partial { count: 0, sum: 0.0, max: -1.0, worst: f32::NAN }
    }

    fn record(&mut self, x: f32, d: f64) {
        self.count += 1;
        self.sum += d;
        if d > self.max || (d == self.max && x < self.worst) {
            self.max = d;
            self.worst = x;
        }
    }

    fn absorb(&mut self, o: &Partial) {
        self.count += o.count;
        self.sum += o.sum;
        if o.max > self.max || (o.max == self.max && o.worst < self.worst) {
            self.max = o.max;
            self.worst = o.worst;
        }
    }
}

/// Measure `exp` against the double-precision oracle over `[lo, hi]`.
///
/// The range splits into contiguous sub-ranges, one worker per sub-range,
/// and the per-worker reports merge into one. Deterministic for a fixed
/// `(lo, hi, mode, seed, threads)`.
pub fn sweep_exp_accuracy(
    lo: f32,
    hi: f32,
    mode: SweepMode,
    seed: u64,
    threads: usize,
) -> Result<UlpReport, Error> {
    if threads == 0 {
        return Err(Error::InvalidThreadCount);
    }
    if !lo.is_finite() || !hi.is_finite() || lo > hi {
        return Err(Error::InvalidRange);
    }

    let total = match mode {
        SweepMode::Sampled { samples } => {
            if samples == 0 {
                return Err(Error::InvalidRange);
            }
            samples as usize
        }
        SweepMode::Exhaustive => (ordered(hi) - ordered(lo)) as usize + 1,
    };
    let ranges = chunk_ranges(total, threads);

    let merged = std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .into_iter()
            .enumerate()
            .map(|(w, r)| {
                s.spawn(move || {
                    let mut part = Partial::new();
                    match mode {
                        SweepMode::Sampled { samples } => {
                            let width = (hi as f64 - lo as f64) / samples as f64;
                            let mut rng = ChaCha8Rng::seed_from_u64(
                                seed ^ (w as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15),
                            );
                            for i in r {
                                let u: f64 = rng.random();
                                let x = (lo as f64 + (i as f64 + u) * width) as f32;
                                let x = x.clamp(lo, hi);
                                part.record(x, ulp_distance(exp(x), oracle_exp(x)));
                            }
                        }
                        SweepMode::Exhaustive => {
                            let base = ordered(lo);
                            for i in r {
                                let x = from_ordered(base + i as u32);
                                part.record(x, ulp_distance(exp(x), oracle_exp(x)));
                            }
                        }
                    }
                    part
                })
            })
            .collect();
        let mut merged = Partial::new();
        for h in handles {
            merged.absorb(&h.join().expect("sweep worker panicked"));
        }
        merged
    });

    Ok(UlpReport {
        lo,
        hi,
        mode,
        sample_count: merged.count,
        max_ulp: merged.max,
        mean_ulp: merged.sum / merged.count as f64,
        worst_input: merged.worst,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn oracle_exp_known_points() {
        assert_eq!(oracle_exp(0.0), 1.0);
        assert!((oracle_exp(1.0) - std::f64::consts::E).abs() < 1e-15);
    }

    #[test]
    fn oracle_softmax_matches_frozen_three_element_values() {
        let y = oracle_softmax(&[1.0, 2.0, 3.0]).unwrap();
        let expected = [0.090_030_573_170_380_46, 0.244_728_471_054_797_65, 0.665_240_955_774_821_9];
        for (a, b) in y.iter().zip(expected.iter()) {
            assert!((a - b).abs() < 1e-15, "{y:?}");
        }
        let sum: f64 = y.iter().sum();
        assert!((sum - 1.0).abs() < 1e-14);
    }

    #[test]
    fn oracle_softmax_handles_extreme_spread() {
        let y = oracle_softmax(&[3.4e38, 0.0, -3.4e38]).unwrap();
        assert_eq!(y[0], 1.0);
        assert_eq!(y[1], 0.0);
        assert_eq!(y[2], 0.0);
        assert!(oracle_softmax(&[]).is_err());
    }

    #[test]
    fn naive_reference_collapses_to_nan_where_it_should() {
        let mut y = vec![0.0f32; 2];
        naive_softmax_unshifted(&[100.0, 100.0], &mut y).unwrap();
        assert!(y.iter().all(|v| v.is_nan()), "overflow case: {y:?}");
        naive_softmax_unshifted(&[-150.0, -150.0], &mut y).unwrap();
        assert!(y.iter().all(|v| v.is_nan()), "underflow case: {y:?}");
        // In the benign middle of the range it still works.
        naive_softmax_unshifted(&[0.0, 1.0], &mut y).unwrap();
        assert!((y[0] + y[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn ulp_distance_basics() {
        assert_eq!(ulp_distance(1.0, 1.0), 0.0);
        // Reference halfway into the next f32: half an ULP at binade [1, 2).
        assert_eq!(ulp_distance(1.0, 1.0 + 2f64.powi(-24)), 0.5);
        assert_eq!(ulp_distance(1.0, 1.0 + 2f64.powi(-23)), 1.0);
        // Subnormal spacing is fixed at 2^-149.
        let tiny = f32::from_bits(1);
        assert_eq!(ulp_distance(tiny, 1.5 * tiny as f64), 0.5);
        assert_eq!(ulp_distance(0.0, tiny as f64), 1.0);
    }

    #[test]
    fn ulp_distance_nonfinite_policy() {
        assert_eq!(ulp_distance(f32::INFINITY, f64::INFINITY), 0.0);
        assert_eq!(ulp_distance(f32::INFINITY, 1.0), f64::INFINITY);
        assert_eq!(ulp_distance(1.0, f64::INFINITY), f64::INFINITY);
        assert_eq!(ulp_distance(f32::NAN, 1.0), f64::INFINITY);
    }

    #[test]
    fn ulp_between_counts_steps() {
        assert_eq!(ulp_between(1.0, 1.0), 0);
        assert_eq!(ulp_between(1.0, f32::from_bits(1.0f32.to_bits() + 1)), 1);
        assert_eq!(ulp_between(0.0, -0.0), 1);
        assert_eq!(ulp_between(0.0, f32::from_bits(1)), 1);
        assert_eq!(ulp_between(-1.0, 1.0), ulp_between(1.0, -1.0));
        assert_eq!(ulp_between(f32::NAN, 1.0), u64::MAX);
    }

    #[test]
    fn hex_float_formatting() {
        assert_eq!(hex_f32(1.0), "0x1p+0");
        assert_eq!(hex_f32(1.5), "0x1.8p+0");
        assert_eq!(hex_f32(-2.0), "-0x1p+1");
        assert_eq!(hex_f32(0.0), "0x0p+0");
        assert_eq!(hex_f32(-0.0), "-0x0p+0");
        assert_eq!(hex_f32(f32::MAX), "0x1.fffffep+127");
        assert_eq!(hex_f32(f32::from_bits(1)), "0x0.000002p-126");
        assert_eq!(hex_f32(f32::INFINITY), "inf");
        assert_eq!(hex_f32(f32::NEG_INFINITY), "-inf");
        assert_eq!(hex_f32(f32::NAN), "nan");
        // Round-trip through the exact hex expansion of 0.1f32.
        assert_eq!(hex_f32(0.1), "0x1.99999ap-4");
    }

    #[test]
    fn sweep_rejects_bad_arguments() {
        let m = SweepMode::Sampled { samples: 10 };
        assert_eq!(sweep_exp_accuracy(0.0, 1.0, m, 0, 0), Err(Error::InvalidThreadCount));
        assert_eq!(sweep_exp_accuracy(1.0, 0.0, m, 0, 1), Err(Error::InvalidRange));
        assert_eq!(sweep_exp_accuracy(f32::NAN, 0.0, m, 0, 1), Err(Error::InvalidRange));
        assert_eq!(
            sweep_exp_accuracy(0.0, 1.0, SweepMode::Sampled { samples: 0 }, 0, 1),
            Err(Error::InvalidRange)
        );
    }

    #[test]
    fn sampled_sweep_is_deterministic_and_accurate() {
        let mode = SweepMode::Sampled { samples: 20_000 };
        let a = sweep_exp_accuracy(-87.0, 0.0, mode, 42, 2).unwrap();
        let b = sweep_exp_accuracy(-87.0, 0.0, mode, 42, 2).unwrap();
        assert_eq!(a.sample_count, 20_000);
        assert_eq!(a.max_ulp, b.max_ulp);
        assert_eq!(a.mean_ulp, b.mean_ulp);
        assert_eq!(a.worst_input.to_bits(), b.worst_input.to_bits());
        assert!(a.max_ulp <= 2.0, "max {}", a.max_ulp);
        assert!(a.mean_ulp <= 1.0, "mean {}", a.mean_ulp);
        assert!(a.worst_input >= -87.0 && a.worst_input <= 0.0);
    }

    #[test]
    fn exhaustive_sweep_visits_every_pattern_in_range() {
        let lo = 1.0f32;
        let hi = f32::from_bits(1.0f32.to_bits() + 1000);
        let r = sweep_exp_accuracy(lo, hi, SweepMode::Exhaustive, 0, 3).unwrap();
        assert_eq!(r.sample_count, 1001);
        assert!(r.max_ulp <= 2.0, "max {}", r.max_ulp);
    }

    #[test]
    fn exhaustive_sweep_crosses_zero_cleanly() {
        let lo = -f32::from_bits(3);
        let hi = f32::from_bits(3);
        let r = sweep_exp_accuracy(lo, hi, SweepMode::Exhaustive, 0, 2).unwrap();
        // 3 negative subnormals + two zeros + 3 positive subnormals.
        assert_eq!(r.sample_count, 8);
        assert_eq!(r.max_ulp, 0.0);
    }

    #[test]
    fn csv_row_shape() {
        let r = sweep_exp_accuracy(-1.0, 0.0, SweepMode::Sampled { samples: 100 }, 7, 1).unwrap();
        assert_eq!(UlpReport::csv_header().split(',').count(), 7);
        let row = r.csv_row();
        assert_eq!(row.split(',').count(), 7);
        assert!(row.contains("sampled"));
        assert!(row.contains("0x"), "worst input should be hex formatted: {row}");
    }
}
