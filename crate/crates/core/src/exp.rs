//! Single-precision exponential kernels built on Cody-Waite range reduction
//! and a degree-5 polynomial, in two flavors:
//!
//! * [`exp`] — plain `e^x` for non-positive arguments, reconstructing
//!   `p * 2^n` through the `f32` exponent field (results below the normal
//!   range flush to zero);
//! * [`ext_exp`] — the same reduction with the reconstruction *omitted*,
//!   returning the `(m, n)` pair so `e^x` never overflows for any finite `x`.
//!
//! Batch variants process unrolled blocks and are bit-exact with the scalar
//! kernels for every tuning configuration.

use crate::ext_float::{pow2, ExtFloat};
use crate::tuning::TuningParams;

/// Constants for the reduction `x = n*ln2 + t` and the polynomial `p(t) ~ e^t`.
///
/// `ln2_hi` carries 15 trailing zero mantissa bits, so `n * ln2_hi` is exact
/// for all `|n| <= 2^15` — far beyond the `|n| <= 126` reachable on the
/// accuracy domain, and past the `2^10` integer range other kernels commonly
/// require of the split. The coefficients approximate `e^t` on
/// `[-ln2/2, ln2/2]` with a maximum relative error of `1.55 * 2^-24` (checked
/// in-tree against an extended-precision oracle; regeneration script in
/// `scripts/`).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ExpCoefficients {
    /// `log2(e)` rounded to `f32`.
    pub log2_e: f32,
    /// High part of `ln 2`; product with small integral `n` is exact.
    pub ln2_hi: f32,
    /// Low part: `ln2_hi + ln2_lo` matches `ln 2` to ~`1.6e-12`.
    pub ln2_lo: f32,
    /// `p(t) = 1 + t*(c[0] + t*(c[1] + t*(c[2] + t*(c[3] + t*c[4]))))`.
    pub c: [f32; 5],
}

impl ExpCoefficients {
    pub const DEFAULT: ExpCoefficients = ExpCoefficients {
        log2_e: 1.442_695,        // 0x3FB8AA3B
        ln2_hi: 0.693_359_375,    // 0x3F318000
        ln2_lo: -2.121_944_4e-4,  // 0xB95E8083
        c: [
            0.999_999_7,    // 0x3F7FFFFB
            0.499_991_5,    // 0x3EFFFEE3
            0.166_676_52,   // 0x3E2AAD40
            0.041_897_822,  // 0x3D2B9D0D
            0.008_289_291,  // 0x3C07CFCE
        ],
    };
}

impl Default for ExpCoefficients {
    fn default() -> Self {
        Self::DEFAULT
    }
}

/// Arguments below this flush to zero: `e^x` falls under the `f32` normal
/// range (nearest `f32` to `-126 * ln 2`). The comparison also catches `-inf`
/// (e.g. from an overflowed subtraction in a max-shifted pass), which the
/// saturating reduction would otherwise map to a tiny positive result.
const FLUSH_CUTOFF: f32 = -87.33655; // 0xC2AEAC50

/// Reduction arguments saturate at `+-X_BOUND` (the nearest integer to
/// `2^24 * ln 2`), which pins `|n|` at `2^24`: `n` stays an exact `f32`
/// integer, `n * ln2_hi` stays far from overflow, and the Cody-Waite
/// remainder stays bounded (`|t|` reaches ~0.6 near the bound, where the
/// rounding of `log2e` itself shifts `n`; the polynomial extrapolates that
/// far without drama) — one clamp covers all three. `X_BOUND * log2e`
/// computes to just under `2^24`, so rounding `n` never pushes past the pin.
const X_BOUND: f32 = 11_629_080.0;

/// Conceptual lanes per unroll unit in the batch kernels. A tuning unroll
/// factor of `u` processes `u * VECTOR_WIDTH` elements per block.
pub const VECTOR_WIDTH: usize = 8;

/// Split `x` into `(n, t)` with `x ~ n*ln2 + t`: `n = round-to-nearest-even`
/// of `x * log2e` and `t` the two-step Cody-Waite remainder, with `x` first
/// saturated to `[-X_BOUND, X_BOUND]`.
///
/// The input clamp is inert for every representable `|x| <= X_BOUND` — in
/// particular the whole accuracy domain `[-87.34, 0]`, where `|t| <= ln2/2`
/// within rounding slop. For larger `|x|` it bounds `n` so no FMA input can
/// overflow (unclamped, `x * log2e` turns infinite near the `f32` limit and
/// the second FMA would form `inf - inf = NaN`) and keeps `|t|` well under
/// `0.35`. The `max`/`min` ordering sends a NaN argument to `-X_BOUND`, the
/// bottom of the range, so a NaN decays to a vanishing term rather than
/// poisoning a reduction.
#[inline]
pub fn range_reduce(x: f32) -> (f32, f32) {
    let k = &ExpCoefficients::DEFAULT;
    let xc = x.max(-X_BOUND).min(X_BOUND);
    let n = (xc * k.log2_e).round_ties_even();
    let t = f32::mul_add(-n, k.ln2_hi, xc);
    let t = f32::mul_add(-n, k.ln2_lo, t);
    (n, t)
}

/// Evaluate `p(t) = 1 + t*(c1 + t*(c2 + t*(c3 + t*(c4 + t*c5))))` with a fused
/// Horner chain. `poly_eval(0.0, _)` is exactly `1.0`.
#[inline]
pub fn poly_eval(t: f32, k: &ExpCoefficients) -> f32 {
    let p = f32::mul_add(t, k.c[4], k.c[3]);
    let p = f32::mul_add(t, p, k.c[2]);
    let p = f32::mul_add(t, p, k.c[1]);
    let p = f32::mul_add(t, p, k.c[0]);
    f32::mul_add(t, p, 1.0)
}

/// `2^n` for the reconstruction: `n >= 128` saturates to `+inf`, `n <= -127`
/// (including `-inf`) collapses to zero. The `max`/`min` chain floors a NaN
/// exponent instead of passing it to the bit-level construction.
#[inline]
fn reconstruction_scale(n: f32) -> f32 {
    pow2(n.max(-127.0).min(128.0))
}

/// `e^x` for finite `x <= 0`, max error within 2 ULP over `[-87.34, 0]`.
///
/// Results below the `f32` normal range flush to zero. Positive arguments are
/// out of the softmax path but defined: they saturate to `+inf` (from
/// `n >= 128` on) without ever producing NaN.
#[inline]
pub fn exp(x: f32) -> f32 {
    let (n, t) = range_reduce(x);
    let p = poly_eval(t, &ExpCoefficients::DEFAULT);
    let y = p * reconstruction_scale(n);
    if x < FLUSH_CUTOFF {
        0.0
    } else {
        y
    }
}

/// `e^x` as an extended-range pair `(m, n)` with `m = p(t)` and the
/// power-of-two reconstruction left symbolic — no overflow or underflow can
/// occur for any finite `x` of either sign.
///
/// `m` lies within `2^-20` of `[sqrt(2)/2, sqrt(2)]` while the split is
/// faithful, which holds for |x| up to ~3e4; beyond that the reduced
/// argument's rounding error (growing as `|n * ln2_lo|` does) eats into `m`'s
/// accuracy, and past `X_BOUND ~ 1.16e7` the reduction saturates outright at
/// `n = +-2^24`, `m` merely staying finite near 1. Far outside any plausible
/// softmax score range either way.
#[inline]
pub fn ext_exp(x: f32) -> ExtFloat {
    let (n, t) = range_reduce(x);
    ExtFloat { m: poly_eval(t, &ExpCoefficients::DEFAULT), n }
}

/// Elementwise [`exp`] over a slice, processing `unroll_factor * VECTOR_WIDTH`
/// elements per block with a scalar remainder loop. Bit-exact with the scalar
/// kernel for every tuning configuration.
///
/// Mismatched slice lengths are a contract violation (panic).
pub fn exp_batch(x: &[f32], y: &mut [f32], params: &TuningParams) {
    assert_eq!(x.len(), y.len(), "exp_batch length mismatch");
    let block = params.unroll_factor * VECTOR_WIDTH;
    let main = x.len() - x.len() % block;
    for (xb, yb) in x[..main].chunks_exact(block).zip(y[..main].chunks_exact_mut(block)) {
        for (xi, yi) in xb.iter().zip(yb.iter_mut()) {
            *yi = exp(*xi);
        }
    }
    for (xi, yi) in x[main..].iter().zip(y[main..].iter_mut()) {
        *yi = exp(*xi);
    }
}

/// Elementwise [`ext_exp`] over a slice into parallel `m`/`n` arrays, with the
/// same blocking and bit-exactness guarantees as [`exp_batch`].
pub fn ext_exp_batch(x: &[f32], m_out: &mut [f32], n_out: &mut [f32], params: &TuningParams) {
    assert_eq!(x.len(), m_out.len(), "ext_exp_batch m length mismatch");
    assert_eq!(x.len(), n_out.len(), "ext_exp_batch n length mismatch");
    let block = params.unroll_factor * VECTOR_WIDTH;
    let main = x.len() - x.len() % block;
    let mut i = 0;
    while i < main {
        for j in i..i + block {
            let e = ext_exp(x[j]);
            m_out[j] = e.m;
            n_out[j] = e.n;
        }
        i += block;
    }
    for j in main..x.len() {
        let e = ext_exp(x[j]);
        m_out[j] = e.m;
        n_out[j] = e.n;
    }
}
