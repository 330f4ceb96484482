//! The memory cost model: how many logical element reads and writes each
//! workload performs, plus an instrumented (counting, non-timed) mirror of
//! every pass that tallies its accesses one by one.
//!
//! Benchmark records derive their byte totals and bandwidth from the model;
//! the instrumented mirrors exist to prove the model right: their counts must
//! equal the closed-form table exactly, and their arithmetic follows the real
//! kernels closely enough to cross-check outputs.

use crate::workload::Workload;
use softmax_core::exp::{exp, ext_exp};
use softmax_core::{scale_by_pow2, ReductionState};

/// Closed-form logical access counts, in elements: `(reads, writes)`.
///
/// The three algorithms cost `(3N, 1N)`, `(3N, 2N)`, and `(2N, 1N)`; each
/// single-pass workload is one read sweep plus at most one write sweep; the
/// stream baselines read one array and write one.
pub fn theoretical_elements(workload: Workload, n: u64) -> (u64, u64) {
    match workload {
        Workload::SoftmaxRecompute => (3 * n, n),
        Workload::SoftmaxReload => (3 * n, 2 * n),
        Workload::SoftmaxTwoPass => (2 * n, n),
        Workload::Pass1Max | Workload::Pass2Recompute | Workload::TwoPassP1 => (n, 0),
        Workload::Pass2Reload
        | Workload::Pass3Recompute
        | Workload::Pass3Reload
        | Workload::TwoPassP2 => (n, n),
        Workload::StreamCopy | Workload::StreamScale | Workload::StreamScaleInplace => (n, n),
    }
}

/// The model in bytes: element counts scaled by the workload's element size.
pub fn theoretical_bytes(workload: Workload, n: u64) -> (u64, u64) {
    let (r, w) = theoretical_elements(workload, n);
    let b = workload.element_bytes();
    (r * b, w * b)
}

/// Tallies logical element accesses as they happen.
#[derive(Debug, Default, Clone, Copy, PartialEq, Eq)]
pub struct AccessTally {
    pub reads: u64,
    pub writes: u64,
}

impl AccessTally {
    fn read_f32(&mut self, slot: &f32) -> f32 {
        self.reads += 1;
        *slot
    }

    fn write_f32(&mut self, slot: &mut f32, value: f32) {
        self.writes += 1;
        *slot = value;
    }

    fn read_f64(&mut self, slot: &f64) -> f64 {
        self.reads += 1;
        *slot
    }

    fn write_f64(&mut self, slot: &mut f64, value: f64) {
        self.writes += 1;
        *slot = value;
    }
}

/// Run the instrumented build of `workload` on a synthetic input of `n`
/// elements and return its exact `(reads, writes)` element counts.
///
/// Scratch values a pass consumes (the max, a sum, a reduction state) are
/// produced by instrumented runs of the passes that feed it, but only the
/// accesses of the workload's own pass structure are counted.
pub fn verify_cost_model(workload: Workload, n: usize) -> (u64, u64) {
    let mut tally = AccessTally::default();
    if workload.is_stream() {
        let a: Vec<f64> = (0..n).map(|i| 1.0 + (i % 5) as f64 * 0.25).collect();
        let mut b = vec![0.0f64; n];
        match workload {
            Workload::StreamCopy => counted_stream_copy(&a, &mut b, &mut tally),
            Workload::StreamScale => counted_stream_scale(&a, &mut b, 3.0, &mut tally),
            Workload::StreamScaleInplace => {
                let mut a = a;
                counted_stream_scale_inplace(&mut a, 3.0, &mut tally)
            }
            _ => unreachable!(),
        }
        return (tally.reads, tally.writes);
    }

    let x: Vec<f32> = (0..n).map(|i| ((i % 113) as f32) * 0.31 - 17.0).collect();
    let mut y = vec![0.0f32; n];
    let mut scratch = AccessTally::default();
    match workload {
        Workload::SoftmaxRecompute => {
            let mu = counted_max(&x, &mut tally);
            let sigma = counted_sum_exp(&x, mu, &mut tally);
            counted_write_exp(&x, mu, 1.0 / sigma, &mut y, &mut tally);
        }
        Workload::SoftmaxReload => {
            let mu = counted_max(&x, &mut tally);
            let sigma = counted_store_exp(&x, mu, &mut y, &mut tally);
            counted_scale(&mut y, 1.0 / sigma, &mut tally);
        }
        Workload::SoftmaxTwoPass => {
            let state = counted_ext_accumulate(&x, &mut tally);
            counted_ext_write(&x, state, 1.0 / state.m_sum, &mut y, &mut tally);
        }
        Workload::Pass1Max => {
            counted_max(&x, &mut tally);
        }
        Workload::Pass2Recompute => {
            let mu = counted_max(&x, &mut scratch);
            counted_sum_exp(&x, mu, &mut tally);
        }
        Workload::Pass2Reload => {
            let mu = counted_max(&x, &mut scratch);
            counted_store_exp(&x, mu, &mut y, &mut tally);
        }
        Workload::Pass3Recompute => {
            let mu = counted_max(&x, &mut scratch);
            let sigma = counted_sum_exp(&x, mu, &mut scratch);
            counted_write_exp(&x, mu, 1.0 / sigma, &mut y, &mut tally);
        }
        Workload::Pass3Reload => {
            let mu = counted_max(&x, &mut scratch);
            let sigma = counted_store_exp(&x, mu, &mut y, &mut scratch);
            counted_scale(&mut y, 1.0 / sigma, &mut tally);
        }
        Workload::TwoPassP1 => {
            counted_ext_accumulate(&x, &mut tally);
        }
        Workload::TwoPassP2 => {
            let state = counted_ext_accumulate(&x, &mut scratch);
            counted_ext_write(&x, state, 1.0 / state.m_sum, &mut y, &mut tally);
        }
        _ => unreachable!(),
    }
    (tally.reads, tally.writes)
}

fn counted_max(x: &[f32], t: &mut AccessTally) -> f32 {
    let mut mu = f32::NEG_INFINITY;
    for slot in x {
        mu = mu.max(t.read_f32(slot));
    }
    mu
}

fn counted_sum_exp(x: &[f32], mu: f32, t: &mut AccessTally) -> f32 {
    let mut sigma = 0.0f32;
    for slot in x {
        sigma += exp(t.read_f32(slot) - mu);
    }
    sigma
}

fn counted_store_exp(x: &[f32], mu: f32, y: &mut [f32], t: &mut AccessTally) -> f32 {
    let mut sigma = 0.0f32;
    for (slot, out) in x.iter().zip(y.iter_mut()) {
        let e = exp(t.read_f32(slot) - mu);
        t.write_f32(out, e);
        sigma += e;
    }
    sigma
}

fn counted_scale(y: &mut [f32], lambda: f32, t: &mut AccessTally) {
    for slot in y.iter_mut() {
        let v = t.read_f32(slot) * lambda;
        t.write_f32(slot, v);
    }
}

fn counted_write_exp(x: &[f32], mu: f32, lambda: f32, y: &mut [f32], t: &mut AccessTally) {
    for (slot, out) in x.iter().zip(y.iter_mut()) {
        let v = exp(t.read_f32(slot) - mu) * lambda;
        t.write_f32(out, v);
    }
}

fn counted_ext_accumulate(x: &[f32], t: &mut AccessTally) -> ReductionState {
    let mut state = ReductionState::IDENTITY;
    for slot in x {
        state.accumulate(ext_exp(t.read_f32(slot)));
    }
    state
}

fn counted_ext_write(
    x: &[f32],
    state: ReductionState,
    lambda_sum: f32,
    y: &mut [f32],
    t: &mut AccessTally,
) {
    for (slot, out) in x.iter().zip(y.iter_mut()) {
        let e = ext_exp(t.read_f32(slot));
        let v = scale_by_pow2(e.m * lambda_sum, e.n - state.n_sum);
        t.write_f32(out, v);
    }
}

fn counted_stream_copy(a: &[f64], b: &mut [f64], t: &mut AccessTally) {
    for (ai, bi) in a.iter().zip(b.iter_mut()) {
        let v = t.read_f64(ai);
        t.write_f64(bi, v);
    }
}

fn counted_stream_scale(a: &[f64], b: &mut [f64], q: f64, t: &mut AccessTally) {
    for (ai, bi) in a.iter().zip(b.iter_mut()) {
        let v = q * t.read_f64(ai);
        t.write_f64(bi, v);
    }
}

fn counted_stream_scale_inplace(a: &mut [f64], q: f64, t: &mut AccessTally) {
    for slot in a.iter_mut() {
        let v = q * t.read_f64(slot);
        t.write_f64(slot, v);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use softmax_core::validate::outputs_agree;
    use softmax_core::{softmax, Algorithm, TuningParams};

    #[test]
    fn instrumented_counts_match_the_table_for_all_workloads() {
        for workload in Workload::ALL {
            for n in [1usize, 17, 1024] {
                let counted = verify_cost_model(workload, n);
                let expected = theoretical_elements(workload, n as u64);
                assert_eq!(counted, expected, "{workload} at N = {n}");
            }
        }
    }

    #[test]
    fn algorithm_costs_are_the_documented_triple() {
        let n = 1024u64;
        assert_eq!(theoretical_elements(Workload::SoftmaxRecompute, n), (3 * n, n));
        assert_eq!(theoretical_elements(Workload::SoftmaxReload, n), (3 * n, 2 * n));
        assert_eq!(theoretical_elements(Workload::SoftmaxTwoPass, n), (2 * n, n));
    }

    #[test]
    fn byte_accounting_uses_element_sizes() {
        // 2N reads + 1N writes at 4 bytes each.
        assert_eq!(theoretical_bytes(Workload::SoftmaxTwoPass, 1024), (8192, 4096));
        // Stream elements are doubles.
        assert_eq!(theoretical_bytes(Workload::StreamCopy, 1024), (8192, 8192));
    }

    #[test]
    fn counting_mirrors_compute_real_softmax_values() {
        // The mirrors exist for their counts, but their arithmetic follows
        // the kernels; spot-check the full outputs against the real thing.
        let n = 97;
        let x: Vec<f32> = (0..n).map(|i| ((i % 113) as f32) * 0.31 - 17.0).collect();
        let params = TuningParams::default();
        let mut t = AccessTally::default();

        let mu = counted_max(&x, &mut t);
        let sigma = counted_sum_exp(&x, mu, &mut t);
        let mut mirror = vec![0.0f32; n];
        counted_write_exp(&x, mu, 1.0 / sigma, &mut mirror, &mut t);
        let mut real = vec![0.0f32; n];
        softmax(&x, &mut real, Algorithm::ThreePassRecompute, &params).unwrap();
        for k in 0..n {
            assert!(
                outputs_agree(mirror[k], real[k], 16),
                "recompute mirror diverges at {k}: {} vs {}",
                mirror[k],
                real[k]
            );
        }

        let state = counted_ext_accumulate(&x, &mut t);
        let mut mirror2 = vec![0.0f32; n];
        counted_ext_write(&x, state, 1.0 / state.m_sum, &mut mirror2, &mut t);
        softmax(&x, &mut real, Algorithm::TwoPass, &params).unwrap();
        for k in 0..n {
            assert!(
                outputs_agree(mirror2[k], real[k], 16),
                "two-pass mirror diverges at {k}: {} vs {}",
                mirror2[k],
                real[k]
            );
        }
    }
}
