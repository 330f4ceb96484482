//! Multi-threaded softmax over contiguous chunks.
//!
//! The input splits into `threads` contiguous chunks of equal size (±1
//! element). Each pass runs as one scoped-thread region — a full barrier
//! separates passes, exactly like the serial pass boundaries — and the
//! per-chunk partial reductions fold in chunk order on the driver thread.
//! That fixed fold order makes results deterministic for a given
//! `(input, algorithm, threads, params)`, and with `threads = 1` the
//! arithmetic is the serial arithmetic, so results are bit-identical to the
//! serial entry points.

use crate::error::Error;
use crate::ext_float::ReductionState;
use crate::softmax::{passes, validate, Algorithm};
use crate::tuning::TuningParams;
use std::ops::Range;

/// Split `len` elements into `threads` contiguous ranges whose sizes differ
/// by at most one (the first `len % threads` chunks carry the extra element).
pub fn chunk_ranges(len: usize, threads: usize) -> Vec<Range<usize>> {
    debug_assert!(threads > 0);
    let base = len / threads;
    let extra = len % threads;
    let mut out = Vec::with_capacity(threads);
    let mut start = 0;
    for t in 0..threads {
        let size = base + usize::from(t < extra);
        out.push(start..start + size);
        start += size;
    }
    out
}

/// Parallel softmax with the same contract as the serial entry points.
pub fn softmax_parallel(
    x: &[f32],
    y: &mut [f32],
    alg: Algorithm,
    threads: usize,
    params: &TuningParams,
) -> Result<(), Error> {
    if threads == 0 {
        return Err(Error::InvalidThreadCount);
    }
    validate(x, y)?;
    let ranges = chunk_ranges(x.len(), threads);
    match alg {
        Algorithm::ThreePassRecompute => {
            let mu = par_max(x, &ranges, params);
            let sigma = par_sum_exp(x, mu, &ranges, params);
            let lambda = 1.0 / sigma;
            par_for_chunks(x, y, &ranges, |xs, ys| passes::write_exp_pass(xs, mu, lambda, ys, params));
        }
        Algorithm::ThreePassReload => {
            let mu = par_max(x, &ranges, params);
            let sigma = par_store_exp(x, mu, y, &ranges, params);
            let lambda = 1.0 / sigma;
            par_for_chunks(x, y, &ranges, |_, ys| passes::scale_pass(ys, lambda, params));
        }
        Algorithm::TwoPass => {
            let state = par_ext_accumulate(x, &ranges, params);
            let lambda_sum = 1.0 / state.m_sum;
            par_for_chunks(x, y, &ranges, |xs, ys| {
                passes::ext_write_pass(xs, state, lambda_sum, ys, params)
            });
        }
    }
    Ok(())
}

fn par_max(x: &[f32], ranges: &[Range<usize>], params: &TuningParams) -> f32 {
    std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|r| {
                let xs = &x[r.clone()];
                s.spawn(move || passes::max_pass(xs, params))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("max pass worker panicked"))
            .fold(f32::NEG_INFINITY, f32::max)
    })
}

fn par_sum_exp(x: &[f32], mu: f32, ranges: &[Range<usize>], params: &TuningParams) -> f32 {
    std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|r| {
                let xs = &x[r.clone()];
                s.spawn(move || passes::sum_exp_pass(xs, mu, params))
            })
            .collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("sum pass worker panicked"))
            .fold(0.0f32, |acc, p| acc + p)
    })
}

fn par_store_exp(
    x: &[f32],
    mu: f32,
    y: &mut [f32],
    ranges: &[Range<usize>],
    params: &TuningParams,
) -> f32 {
    std::thread::scope(|s| {
        let mut handles = Vec::with_capacity(ranges.len());
        let mut rest = y;
        for r in ranges {
            let (head, tail) = rest.split_at_mut(r.len());
            let xs = &x[r.clone()];
            handles.push(s.spawn(move || passes::store_exp_sum_pass(xs, mu, head, params)));
            rest = tail;
        }
        handles
            .into_iter()
            .map(|h| h.join().expect("store pass worker panicked"))
            .fold(0.0f32, |acc, p| acc + p)
    })
}

fn par_ext_accumulate(x: &[f32], ranges: &[Range<usize>], params: &TuningParams) -> ReductionState {
    std::thread::scope(|s| {
        let handles: Vec<_> = ranges
            .iter()
            .map(|r| {
                let xs = &x[r.clone()];
                s.spawn(move || passes::ext_accumulate_pass(xs, params))
            })
            .collect();
        let mut state = ReductionState::IDENTITY;
        for h in handles {
            state.merge(h.join().expect("accumulate pass worker panicked"));
        }
        state
    })
}

/// Run `op` on matching `(x, y)` chunks, one worker per chunk.
fn par_for_chunks<F>(x: &[f32], y: &mut [f32], ranges: &[Range<usize>], op: F)
where
    F: Fn(&[f32], &mut [f32]) + Sync,
{
    let op = &op;
    std::thread::scope(|s| {
        let mut rest = y;
        for r in ranges {
            let (head, tail) = rest.split_at_mut(r.len());
            let xs = &x[r.clone()];
            s.spawn(move || op(xs, head));
            rest = tail;
        }
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::softmax::softmax;
    use crate::validate::outputs_agree;

    fn mixed_input(n: usize) -> Vec<f32> {
        (0..n)
            .map(|i| match i % 7 {
                0 => (i as f32 * 0.37).sin() * 80.0,
                1 => -1.0e38,
                2 => (i as f32).sqrt(),
                3 => -(i as f32) * 0.001,
                4 => 1.0e38,
                5 => 0.0,
                _ => (i as f32 * 0.11).cos() * 50.0,
            })
            .collect()
    }

    #[test]
    fn chunk_ranges_cover_contiguously() {
        assert_eq!(chunk_ranges(10, 3), vec![0..4, 4..7, 7..10]);
        assert_eq!(chunk_ranges(3, 5), vec![0..1, 1..2, 2..3, 3..3, 3..3]);
        assert_eq!(chunk_ranges(0, 2), vec![0..0, 0..0]);
        for len in [0usize, 1, 2, 17, 256, 1021] {
            for threads in 1..9 {
                let rs = chunk_ranges(len, threads);
                assert_eq!(rs.len(), threads);
                assert_eq!(rs.first().unwrap().start, 0);
                assert_eq!(rs.last().unwrap().end, len);
                for w in rs.windows(2) {
                    assert_eq!(w[0].end, w[1].start);
                }
                let sizes: Vec<usize> = rs.iter().map(|r| r.len()).collect();
                let max = *sizes.iter().max().unwrap();
                let min = *sizes.iter().min().unwrap();
                assert!(max - min <= 1, "len {len} threads {threads}: {sizes:?}");
            }
        }
    }

    #[test]
    fn contract_violations() {
        let x = [1.0f32, 2.0];
        let mut y = [0.0f32; 2];
        assert_eq!(
            softmax_parallel(&x, &mut y, Algorithm::TwoPass, 0, &TuningParams::default()),
            Err(Error::InvalidThreadCount)
        );
        assert_eq!(
            softmax_parallel(&[], &mut [], Algorithm::TwoPass, 2, &TuningParams::default()),
            Err(Error::EmptyInput)
        );
        let mut y3 = [0.0f32; 3];
        assert_eq!(
            softmax_parallel(&x, &mut y3, Algorithm::TwoPass, 2, &TuningParams::default()),
            Err(Error::LengthMismatch { expected: 2, got: 3 })
        );
    }

    #[test]
    fn single_thread_is_bit_identical_to_serial() {
        let params = TuningParams::default();
        for n in [1usize, 7, 64, 1000] {
            let x = mixed_input(n);
            for alg in Algorithm::ALL {
                let mut serial = vec![0.0f32; n];
                softmax(&x, &mut serial, alg, &params).unwrap();
                let mut par = vec![0.0f32; n];
                softmax_parallel(&x, &mut par, alg, 1, &params).unwrap();
                for k in 0..n {
                    assert_eq!(
                        serial[k].to_bits(),
                        par[k].to_bits(),
                        "{alg} length {n} element {k}"
                    );
                }
            }
        }
    }

    #[test]
    fn multi_thread_stays_within_4_ulp_of_serial() {
        let params = TuningParams::default();
        let x = mixed_input(1003);
        for alg in Algorithm::ALL {
            let mut serial = vec![0.0f32; x.len()];
            softmax(&x, &mut serial, alg, &params).unwrap();
            for threads in [2usize, 3, 4, 8] {
                let mut par = vec![0.0f32; x.len()];
                softmax_parallel(&x, &mut par, alg, threads, &params).unwrap();
                for k in 0..x.len() {
                    assert!(
                        outputs_agree(serial[k], par[k], 4),
                        "{alg} T={threads} diverges at {k}: {} vs {}",
                        serial[k],
                        par[k]
                    );
                }
            }
        }
    }

    #[test]
    fn repeated_runs_are_deterministic() {
        let params = TuningParams::default();
        let x = mixed_input(517);
        for alg in Algorithm::ALL {
            for threads in [2usize, 5] {
                let mut a = vec![0.0f32; x.len()];
                let mut b = vec![0.0f32; x.len()];
                softmax_parallel(&x, &mut a, alg, threads, &params).unwrap();
                softmax_parallel(&x, &mut b, alg, threads, &params).unwrap();
                assert!(
                    a.iter().zip(b.iter()).all(|(p, q)| p.to_bits() == q.to_bits()),
                    "{alg} T={threads} nondeterministic"
                );
            }
        }
    }

    #[test]
    fn more_threads_than_elements() {
        let params = TuningParams::default();
        let x = [3.0f32, 1.0, 2.0];
        for alg in Algorithm::ALL {
            let mut y = [0.0f32; 3];
            softmax_parallel(&x, &mut y, alg, 8, &params).unwrap();
            let sum: f32 = y.iter().sum();
            assert!((sum - 1.0).abs() < 1e-6, "{alg}: {y:?}");
            assert!(y[0] > y[2] && y[2] > y[1]);
        }
    }
}
