//! Reimplemented STREAM-style bandwidth baselines: Copy, Scale, and in-place
//! Scale over double-precision arrays. Only the methodology is reproduced —
//! the kernels are plain loops the compiler vectorizes — and the canonical
//! array sizing rule (four times the last-level cache) is applied by the
//! benchmark configuration, not here.

/// The canonical STREAM scale factor.
pub const STREAM_SCALE_Q: f64 = 3.0;

/// Copy: `b[i] = a[i]`.
pub fn stream_copy(a: &[f64], b: &mut [f64]) {
    assert_eq!(a.len(), b.len(), "stream_copy length mismatch");
    b.copy_from_slice(a);
}

/// Scale: `b[i] = q * a[i]`.
pub fn stream_scale(a: &[f64], b: &mut [f64], q: f64) {
    assert_eq!(a.len(), b.len(), "stream_scale length mismatch");
    for (ai, bi) in a.iter().zip(b.iter_mut()) {
        *bi = q * *ai;
    }
}

/// In-place Scale: `a[i] = q * a[i]` — same arithmetic as Scale but half the
/// arrays, which separates read-modify-write traffic from streaming stores.
pub fn stream_scale_inplace(a: &mut [f64], q: f64) {
    for ai in a.iter_mut() {
        *ai *= q;
    }
}
