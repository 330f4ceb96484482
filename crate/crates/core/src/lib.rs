//! Numerically robust single-precision softmax kernels.
//!
//! The crate provides three interchangeable softmax algorithms (two
//! max-shifted three-pass variants and a two-pass variant built on
//! extended-range exponential accumulation), the vectorization-friendly
//! `e^x` kernel they share, a parallel driver, kernel tuning parameters with
//! a persistent cache, and accuracy-validation utilities (high-precision
//! oracles, ULP metrology, range sweeps).
//!
//! Entry points return [`Error`] for contract violations (empty input,
//! mismatched lengths, bad thread counts or tuning values); numeric
//! edge cases inside the contract are handled, not reported.

pub mod error;
pub mod exp;
pub mod ext_float;
pub mod parallel;
pub mod softmax;
pub mod tuning;
pub mod validate;

pub use error::Error;
pub use exp::{exp_batch, ext_exp_batch, ExpCoefficients, VECTOR_WIDTH};
pub use ext_float::{scale_by_pow2, ExtFloat, ReductionState};
pub use parallel::{chunk_ranges, softmax_parallel};
pub use softmax::{
    max_reduce, softmax, softmax_three_pass_recompute, softmax_three_pass_reload,
    softmax_two_pass, Algorithm, ScalarStats,
};
pub use tuning::{TuningCache, TuningParams};
pub use validate::{
    oracle_exp, oracle_softmax, outputs_agree, sweep_exp_accuracy, ulp_between, ulp_distance,
    SweepMode, UlpReport,
};
