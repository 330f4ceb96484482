//! Extended-dynamic-range floating point: a value is carried as a pair
//! `(m, n)` meaning `m * 2^n`, with both fields stored as `f32`.
//!
//! The pair widens the representable *range* (not the precision): `n` may hold
//! integer magnitudes far beyond the `f32` exponent field, and `n = -inf`
//! encodes an exact zero. Sums of such pairs are kept normalized against the
//! running maximum exponent, so no intermediate can overflow no matter how
//! large the accumulated exponents get.

/// A value `m * 2^n`. `n` is an integral `f32` (or `-inf` for an exact zero).
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ExtFloat {
    /// Significand. When produced by `ext_exp`, `m` lies in `[sqrt(2)/2, sqrt(2)]`.
    pub m: f32,
    /// Power-of-two scale. Integral, except `-inf` which encodes zero.
    pub n: f32,
}

impl ExtFloat {
    /// The additive identity: represents exactly zero.
    pub const ZERO: ExtFloat = ExtFloat { m: 0.0, n: f32::NEG_INFINITY };

    /// Collapse to a plain `f32`. Saturates/flushes like [`scale_by_pow2`].
    pub fn to_f32(self) -> f32 {
        scale_by_pow2(self.m, self.n)
    }
}

/// Scale `x` by `2^k`, where `k` is an integral `f32` or `-inf`.
///
/// The scale is built by exponent-field construction in two halves, so every
/// `|k| <= 254` scales exactly (up to the usual overflow/underflow at the
/// `f32` boundaries). `k` below `-254` — including `k = -inf` — collapses the
/// scale to zero, so deep underflow saturates to `0.0` for any finite `x`.
/// Results in the subnormal range may flush to zero.
#[inline]
pub fn scale_by_pow2(x: f32, k: f32) -> f32 {
    let kc = k.max(-254.0).min(254.0);
    let k1 = (kc * 0.5).floor();
    let k2 = kc - k1;
    x * pow2(k1) * pow2(k2)
}

/// `2^k` for integral `k` in `[-127, 128]`, by exponent-field construction.
/// `k = -127` constructs `0.0` (the flush path), `k = 128` constructs `+inf`;
/// callers keep `k` in range.
///
/// The exponent field is assembled without a float-to-int cast: adding
/// `1.5 * 2^23` anchors `k` in the binade whose unit step is exactly 1, so the
/// integer lands in the low mantissa bits, and a rebase-plus-shift turns it
/// into the biased exponent. A saturating `as i32` cast here would compile to
/// per-lane scalar extraction inside the batch kernels; this form is a float
/// add, an integer add, and a shift, all of which vectorize.
#[inline]
pub(crate) fn pow2(k: f32) -> f32 {
    // Bit pattern of the anchor 1.5 * 2^23, rebased so the shifted low bits
    // come out as `k + 127`.
    const REBASE: u32 = 127u32.wrapping_sub(0x4B40_0000);
    let anchored = k + 12_582_912.0;
    f32::from_bits(anchored.to_bits().wrapping_add(REBASE).wrapping_shl(23))
}

/// Running sum of [`ExtFloat`] terms, normalized to the largest exponent seen.
///
/// Invariants: `n_sum` equals the maximum `n` accumulated so far, and every
/// rescale inside [`accumulate`](Self::accumulate) uses a non-positive scale
/// exponent, so `m_sum` can never overflow.
#[derive(Copy, Clone, Debug, PartialEq)]
pub struct ReductionState {
    pub m_sum: f32,
    pub n_sum: f32,
}

impl Default for ReductionState {
    fn default() -> Self {
        Self::IDENTITY
    }
}

impl ReductionState {
    /// Empty sum: `(0, -inf)`.
    pub const IDENTITY: ReductionState = ReductionState { m_sum: 0.0, n_sum: f32::NEG_INFINITY };

    /// Add one term: `n_sum' = max(e.n, n_sum)`, then both contributions are
    /// rescaled onto that exponent and added.
    ///
    /// A zero term (`n = -inf`) leaves the state untouched: its scale exponent
    /// `-inf - n_max` collapses to a zero scale inside [`pow2_floor`].
    ///
    /// Deliberately branch-free so that arrays of independent states vectorize;
    /// the select-form maximum compiles to a single vector-max instruction.
    /// The one degenerate case - term and state both zero, where `-inf - -inf`
    /// is NaN - still lands on the identity: `max` in [`pow2_floor`] ignores
    /// its NaN operand and floors the scale exponent at `-127`, a zero scale,
    /// leaving `m_sum = 0.0 * 0.0 + 0.0 * 0.0 = 0.0` and `n_sum = -inf`.
    #[inline]
    pub fn accumulate(&mut self, e: ExtFloat) {
        let n_max = if e.n > self.n_sum { e.n } else { self.n_sum };
        let new_term = e.m * pow2_floor(e.n - n_max);
        let old_term = self.m_sum * pow2_floor(self.n_sum - n_max);
        self.m_sum = old_term + new_term;
        self.n_sum = n_max;
    }

    /// Fold another state into this one, streaming its `(m_sum, n_sum)` pair
    /// through the same max/rescale/add path as [`accumulate`](Self::accumulate).
    /// `merge` with the identity on either side is exact bit-for-bit.
    #[inline]
    pub fn merge(&mut self, other: ReductionState) {
        self.accumulate(ExtFloat { m: other.m_sum, n: other.n_sum });
    }

    /// Represented value `m_sum * 2^n_sum` as `f32` (saturating like
    /// [`scale_by_pow2`]); meaningful only for small `n_sum`.
    pub fn to_f32(self) -> f32 {
        scale_by_pow2(self.m_sum, self.n_sum)
    }
}

/// [`ReductionState::accumulate`] on a state held as two separate fields.
/// Batch kernels keep lanes of `m_sum` and `n_sum` in split arrays - one
/// vector register each - so the pair never needs interleaving shuffles; this
/// wrapper keeps the arithmetic defined in exactly one place.
#[inline(always)]
pub(crate) fn accumulate_split(m_sum: &mut f32, n_sum: &mut f32, e: ExtFloat) {
    let mut state = ReductionState { m_sum: *m_sum, n_sum: *n_sum };
    state.accumulate(e);
    *m_sum = state.m_sum;
    *n_sum = state.n_sum;
}

/// Single-construction `2^k` for non-positive scale exponents: everything at
/// or below `-127` (including `-inf`) floors to a zero scale. Accumulation
/// scale exponents are never positive (they are differences against a running
/// maximum), so no upper clamp is needed and the scale is exact wherever it is
/// nonzero.
///
/// `f32::max` ignores a NaN operand, so a NaN exponent (only reachable as
/// `-inf - -inf` in the accumulator's degenerate all-zero case) floors to
/// `-127` and yields a zero scale instead of poisoning the sum.
#[inline]
fn pow2_floor(k: f32) -> f32 {
    pow2(k.max(-127.0))
}
