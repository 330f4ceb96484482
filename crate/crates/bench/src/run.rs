//! The measurement engine.
//!
//! Protocol, per measurement: the input array is filled (and thereby
//! pre-touched) once; then for each repetition, timed iterations accumulate
//! until the repetition's timed total reaches the minimum runtime, with the
//! output buffer evicted before every iteration (eviction, like in-place
//! input refill, sits outside the timed span); the repetition's time is
//! total/iterations, and the reported time is the median over repetitions.
//! Byte totals come from the workload cost model, never from counters.

use crate::clock::{Clock, MonotonicClock};
use crate::cost_model::theoretical_bytes;
use crate::error::BenchError;
use crate::evict::{EvictionMode, Evictor};
use crate::stream;
use crate::topology::{frequency_scaling_warning, CacheTopology};
use crate::workload::Workload;
use softmax_core::softmax::passes;
use softmax_core::{chunk_ranges, softmax, Algorithm, ReductionState, TuningCache, TuningParams};
use std::hint::black_box;
use std::sync::atomic::{AtomicBool, AtomicU32, Ordering};
use std::sync::Barrier;

/// Repetition/runtime settings, separable from the workload under test.
/// Defaults are the full-methodology settings; [`MeasureProtocol::CI`] is the
/// reduced variant for time-budgeted runs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasureProtocol {
    pub min_runtime_seconds: f64,
    pub repetitions: usize,
}

impl Default for MeasureProtocol {
    fn default() -> Self {
        MeasureProtocol { min_runtime_seconds: 5.0, repetitions: 25 }
    }
}

impl MeasureProtocol {
    /// Reduced settings (1 s minimum runtime, 5 repetitions) for
    /// continuous-integration budgets.
    pub const CI: MeasureProtocol = MeasureProtocol { min_runtime_seconds: 1.0, repetitions: 5 };

    fn validate(&self) -> Result<(), BenchError> {
        if !(self.min_runtime_seconds > 0.0) || !self.min_runtime_seconds.is_finite() {
            return Err(BenchError::InvalidConfig(format!(
                "min_runtime_seconds must be positive and finite, got {}",
                self.min_runtime_seconds
            )));
        }
        if self.repetitions == 0 {
            return Err(BenchError::InvalidConfig("repetitions must be at least 1".into()));
        }
        Ok(())
    }
}

/// One fully specified measurement.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BenchConfig {
    pub workload: Workload,
    pub size_elements: usize,
    pub threads: usize,
    pub min_runtime_seconds: f64,
    pub repetitions: usize,
}

impl BenchConfig {
    /// Single-threaded config with the default (full) protocol.
    pub fn new(workload: Workload, size_elements: usize) -> Self {
        let p = MeasureProtocol::default();
        BenchConfig {
            workload,
            size_elements,
            threads: 1,
            min_runtime_seconds: p.min_runtime_seconds,
            repetitions: p.repetitions,
        }
    }

    pub fn with_protocol(mut self, p: MeasureProtocol) -> Self {
        self.min_runtime_seconds = p.min_runtime_seconds;
        self.repetitions = p.repetitions;
        self
    }

    pub fn with_threads(mut self, threads: usize) -> Self {
        self.threads = threads;
        self
    }

    fn protocol(&self) -> MeasureProtocol {
        MeasureProtocol {
            min_runtime_seconds: self.min_runtime_seconds,
            repetitions: self.repetitions,
        }
    }

    fn validate(&self) -> Result<(), BenchError> {
        self.protocol().validate()?;
        if self.size_elements == 0 {
            return Err(BenchError::InvalidConfig("size_elements must be at least 1".into()));
        }
        if self.threads == 0 {
            return Err(BenchError::InvalidConfig("threads must be at least 1".into()));
        }
        if self.threads > 1 && !self.workload.supports_threads() {
            return Err(BenchError::Unsupported {
                workload: self.workload,
                threads: self.threads,
            });
        }
        Ok(())
    }
}

/// One measurement result. Byte totals and the rates derived from them use
/// the workload's cost model, so identical configs always account
/// identically.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRecord {
    pub workload: Workload,
    pub size_elements: usize,
    pub threads: usize,
    pub median_time_s: f64,
    pub bytes_read: u64,
    pub bytes_written: u64,
    pub bandwidth_bytes_per_s: f64,
    pub elements_per_s: f64,
    pub eviction_mode: EvictionMode,
}

/// Owns the measurement machinery: topology, the eviction mechanism (fixed
/// at construction), kernel tuning parameters, and the clock.
pub struct Harness {
    topology: CacheTopology,
    evictor: Evictor,
    tuning: TuningCache,
    warnings: Vec<String>,
}

impl Harness {
    pub fn new(topology: CacheTopology) -> Result<Harness, BenchError> {
        let evictor = Evictor::new(&topology)?;
        let warnings = frequency_scaling_warning().into_iter().collect();
        Ok(Harness { topology, evictor, tuning: TuningCache::default(), warnings })
    }

    /// Use tuned kernel parameters (looked up per workload name; absent
    /// entries fall back to the defaults).
    pub fn set_tuning(&mut self, tuning: TuningCache) {
        self.tuning = tuning;
    }

    pub fn topology(&self) -> &CacheTopology {
        &self.topology
    }

    pub fn eviction_mode(&self) -> EvictionMode {
        self.evictor.mode()
    }

    /// Environment concerns detected at construction (e.g. active frequency
    /// scaling) — worth printing next to results.
    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    /// Run one measurement with the production clock.
    pub fn run_benchmark(&mut self, config: &BenchConfig) -> Result<BenchRecord, BenchError> {
        let params = self.tuning.get(config.workload.name());
        self.measure(config, &params, &MonotonicClock::new())
    }

    /// Run one measurement with explicit kernel parameters (the auto-tuner's
    /// entry point; `run_benchmark` resolves parameters from the tuning cache
    /// instead).
    pub fn run_benchmark_with_params(
        &mut self,
        config: &BenchConfig,
        params: &TuningParams,
    ) -> Result<BenchRecord, BenchError> {
        self.measure(config, params, &MonotonicClock::new())
    }

    /// Testable core: clock injected.
    pub(crate) fn measure(
        &mut self,
        config: &BenchConfig,
        params: &TuningParams,
        clock: &dyn Clock,
    ) -> Result<BenchRecord, BenchError> {
        config.validate()?;
        let rep_times = if config.threads > 1 {
            self.measure_parallel(config, params, clock)?
        } else {
            self.measure_serial(config, params, clock)?
        };
        let median_time_s = median(rep_times);
        let (bytes_read, bytes_written) =
            theoretical_bytes(config.workload, config.size_elements as u64);
        Ok(BenchRecord {
            workload: config.workload,
            size_elements: config.size_elements,
            threads: config.threads,
            median_time_s,
            bytes_read,
            bytes_written,
            bandwidth_bytes_per_s: (bytes_read + bytes_written) as f64 / median_time_s,
            elements_per_s: config.size_elements as f64 / median_time_s,
            eviction_mode: self.evictor.mode(),
        })
    }

    fn measure_serial(
        &mut self,
        config: &BenchConfig,
        params: &TuningParams,
        clock: &dyn Clock,
    ) -> Result<Vec<f64>, BenchError> {
        let n = config.size_elements;
        let protocol = config.protocol();
        if config.workload.is_stream() {
            let mut a = alloc_f64(n)?;
            fill_stream(&mut a);
            let a_init = match config.workload {
                Workload::StreamScaleInplace => a.clone(),
                _ => Vec::new(),
            };
            let mut b = match config.workload {
                Workload::StreamScaleInplace => Vec::new(),
                _ => alloc_f64(n)?,
            };
            let evictor = &mut self.evictor;
            let workload = config.workload;
            let mut pre_iter = |evictor: &mut Evictor, a: &mut Vec<f64>, b: &mut Vec<f64>| {
                match workload {
                    Workload::StreamScaleInplace => {
                        a.copy_from_slice(&a_init);
                        evictor.evict_f64(a);
                    }
                    _ => evictor.evict_f64(b),
                }
            };
            let mut times = Vec::with_capacity(protocol.repetitions);
            for _ in 0..protocol.repetitions {
                let mut timed = 0.0f64;
                let mut iters = 0u64;
                while timed < protocol.min_runtime_seconds {
                    pre_iter(evictor, &mut a, &mut b);
                    let t0 = clock.now();
                    match workload {
                        Workload::StreamCopy => stream::stream_copy(&a, &mut b),
                        Workload::StreamScale => {
                            stream::stream_scale(&a, &mut b, stream::STREAM_SCALE_Q)
                        }
                        Workload::StreamScaleInplace => {
                            stream::stream_scale_inplace(&mut a, stream::STREAM_SCALE_Q)
                        }
                        _ => unreachable!(),
                    }
                    let t1 = clock.now();
                    black_box((&a, &b));
                    timed += (t1 - t0).as_secs_f64();
                    iters += 1;
                }
                times.push(timed / iters as f64);
            }
            return Ok(times);
        }

        // Softmax-family workloads: f32 input, optional f32 output, and any
        // scalars the isolated pass consumes precomputed outside timing.
        let mut x = alloc_f32(n)?;
        fill_scores(&mut x);
        let mut y = if config.workload.has_output() { alloc_f32(n)? } else { Vec::new() };
        let scratch = PassInputs::prepare(config.workload, &x, &mut y, params);
        let y_init = if config.workload.is_in_place() { y.clone() } else { Vec::new() };

        let workload = config.workload;
        let mut times = Vec::with_capacity(protocol.repetitions);
        for _ in 0..protocol.repetitions {
            let mut timed = 0.0f64;
            let mut iters = 0u64;
            while timed < protocol.min_runtime_seconds {
                if workload.is_in_place() {
                    y.copy_from_slice(&y_init);
                }
                if workload.has_output() {
                    self.evictor.evict_f32(&mut y);
                }
                let t0 = clock.now();
                run_serial_iteration(workload, &x, &mut y, &scratch, params);
                let t1 = clock.now();
                black_box(&y);
                timed += (t1 - t0).as_secs_f64();
                iters += 1;
            }
            times.push(timed / iters as f64);
        }
        Ok(times)
    }

    fn measure_parallel(
        &mut self,
        config: &BenchConfig,
        params: &TuningParams,
        clock: &dyn Clock,
    ) -> Result<Vec<f64>, BenchError> {
        let n = config.size_elements;
        let protocol = config.protocol();
        let alg = match config.workload {
            Workload::SoftmaxRecompute => Algorithm::ThreePassRecompute,
            Workload::SoftmaxReload => Algorithm::ThreePassReload,
            Workload::SoftmaxTwoPass => Algorithm::TwoPass,
            _ => unreachable!("validate() rejects threads > 1 for other workloads"),
        };
        let mut x = alloc_f32(n)?;
        fill_scores(&mut x);
        let mut y = alloc_f32(n)?;
        // The workers hold the chunk borrows of `y` for the whole pool
        // lifetime, so eviction between iterations goes through the raw
        // range. Cache-line flushing does not touch the data, and in thrash
        // mode only the scratch buffer is written, so this never races the
        // (quiescent) workers.
        let y_addr = y.as_mut_ptr();
        let y_len = y.len();
        let evictor = &mut self.evictor;
        let logical = self.topology.logical_cpu_count;

        let mut times = Vec::with_capacity(protocol.repetitions);
        run_worker_pool(&x, &mut y, alg, config.threads, params, logical, &mut |run_once| {
            for _ in 0..protocol.repetitions {
                let mut timed = 0.0f64;
                let mut iters = 0u64;
                while timed < protocol.min_runtime_seconds {
                    evictor.evict_raw(y_addr.cast(), y_len * 4);
                    let t0 = clock.now();
                    run_once();
                    let t1 = clock.now();
                    timed += (t1 - t0).as_secs_f64();
                    iters += 1;
                }
                times.push(timed / iters as f64);
            }
        });
        Ok(times)
    }

    /// Run every workload at every size, sizes outermost and ascending order
    /// preserved, so workloads being compared at one size run adjacent in
    /// time.
    pub fn run_size_sweep(
        &mut self,
        workloads: &[Workload],
        sizes: &[usize],
        protocol: MeasureProtocol,
    ) -> Result<Vec<BenchRecord>, BenchError> {
        let mut records = Vec::with_capacity(workloads.len() * sizes.len());
        for &size in sizes {
            for &workload in workloads {
                let config = BenchConfig::new(workload, size).with_protocol(protocol);
                records.push(self.run_benchmark(&config)?);
            }
        }
        Ok(records)
    }

    /// Weak-scaling sweep: array size fixed at the out-of-cache rule (4x the
    /// last-level cache), thread counts as given. Only the end-to-end softmax
    /// workloads decompose across threads.
    pub fn run_thread_scaling(
        &mut self,
        workloads: &[Workload],
        thread_counts: &[usize],
        protocol: MeasureProtocol,
    ) -> Result<Vec<BenchRecord>, BenchError> {
        let size = (self.topology.out_of_cache_bytes() / 4) as usize;
        let mut records = Vec::with_capacity(workloads.len() * thread_counts.len());
        for &workload in workloads {
            if !workload.supports_threads() {
                return Err(BenchError::Unsupported { workload, threads: 0 });
            }
            for &threads in thread_counts {
                let config =
                    BenchConfig::new(workload, size).with_protocol(protocol).with_threads(threads);
                records.push(self.run_benchmark(&config)?);
            }
        }
        Ok(records)
    }
}

/// Scalars consumed by isolated pass workloads, computed during setup with
/// the same kernels the passes share.
struct PassInputs {
    mu: f32,
    lambda: f32,
    state: ReductionState,
    lambda_sum: f32,
}

impl PassInputs {
    fn prepare(workload: Workload, x: &[f32], y: &mut [f32], params: &TuningParams) -> PassInputs {
        let mut inputs =
            PassInputs { mu: 0.0, lambda: 1.0, state: ReductionState::IDENTITY, lambda_sum: 1.0 };
        match workload {
            Workload::Pass2Recompute | Workload::Pass2Reload => {
                inputs.mu = passes::max_pass(x, params);
            }
            Workload::Pass3Recompute => {
                inputs.mu = passes::max_pass(x, params);
                inputs.lambda = 1.0 / passes::sum_exp_pass(x, inputs.mu, params);
            }
            Workload::Pass3Reload => {
                // The scale pass starts from the stored exponentials, so the
                // refill template must hold exactly those.
                inputs.mu = passes::max_pass(x, params);
                inputs.lambda = 1.0 / passes::store_exp_sum_pass(x, inputs.mu, y, params);
            }
            Workload::TwoPassP2 => {
                inputs.state = passes::ext_accumulate_pass(x, params);
                inputs.lambda_sum = 1.0 / inputs.state.m_sum;
            }
            _ => {}
        }
        inputs
    }
}

fn run_serial_iteration(
    workload: Workload,
    x: &[f32],
    y: &mut [f32],
    inputs: &PassInputs,
    params: &TuningParams,
) {
    match workload {
        Workload::SoftmaxRecompute => {
            softmax(x, y, Algorithm::ThreePassRecompute, params).expect("validated config")
        }
        Workload::SoftmaxReload => {
            softmax(x, y, Algorithm::ThreePassReload, params).expect("validated config")
        }
        Workload::SoftmaxTwoPass => {
            softmax(x, y, Algorithm::TwoPass, params).expect("validated config")
        }
        Workload::Pass1Max => {
            black_box(passes::max_pass(x, params));
        }
        Workload::Pass2Recompute => {
            black_box(passes::sum_exp_pass(x, inputs.mu, params));
        }
        Workload::Pass2Reload => {
            black_box(passes::store_exp_sum_pass(x, inputs.mu, y, params));
        }
        Workload::Pass3Recompute => {
            passes::write_exp_pass(x, inputs.mu, inputs.lambda, y, params)
        }
        Workload::Pass3Reload => passes::scale_pass(y, inputs.lambda, params),
        Workload::TwoPassP1 => {
            let state = passes::ext_accumulate_pass(x, params);
            black_box(state.m_sum);
        }
        Workload::TwoPassP2 => {
            passes::ext_write_pass(x, inputs.state, inputs.lambda_sum, y, params)
        }
        _ => unreachable!("stream workloads take the f64 path"),
    }
}

/// Shared coordination state for the persistent worker pool. A barrier wait
/// separates every producer/consumer handoff, so relaxed-adjacent orderings
/// suffice; stores use Release and loads Acquire for clarity.
struct PoolShared {
    barrier: Barrier,
    shutdown: AtomicBool,
    // Scalars broadcast by the driver between passes (f32 bit patterns).
    mu_bits: AtomicU32,
    lambda_bits: AtomicU32,
    state_m_bits: AtomicU32,
    state_n_bits: AtomicU32,
    // One (a, b) slot pair per worker for partial results.
    partials: Vec<(AtomicU32, AtomicU32)>,
}

impl PoolShared {
    fn new(threads: usize) -> PoolShared {
        PoolShared {
            barrier: Barrier::new(threads + 1),
            shutdown: AtomicBool::new(false),
            mu_bits: AtomicU32::new(0),
            lambda_bits: AtomicU32::new(0),
            state_m_bits: AtomicU32::new(0),
            state_n_bits: AtomicU32::new(0),
            partials: (0..threads).map(|_| (AtomicU32::new(0), AtomicU32::new(0))).collect(),
        }
    }
}

/// Spawn `threads` persistent workers over contiguous chunks of `x`/`y`,
/// hand the driver a `run_once` closure that executes one full parallel
/// softmax (all passes, pass-boundary barriers inside), and tear the pool
/// down when `body` returns. Timing a `run_once` call times exactly the
/// parallel region.
///
/// Partial results fold on the driver in worker order — the same fixed
/// combination order as the library's parallel entry point, so outputs match
/// it bit for bit.
fn run_worker_pool(
    x: &[f32],
    y: &mut [f32],
    alg: Algorithm,
    threads: usize,
    params: &TuningParams,
    logical_cpus: usize,
    body: &mut dyn FnMut(&mut dyn FnMut()),
) {
    let ranges = chunk_ranges(x.len(), threads);
    let shared = PoolShared::new(threads);

    // Split y into per-worker mutable chunks up front.
    let mut y_chunks: Vec<&mut [f32]> = Vec::with_capacity(threads);
    let mut rest = y;
    for r in &ranges {
        let (head, tail) = rest.split_at_mut(r.len());
        y_chunks.push(head);
        rest = tail;
    }

    std::thread::scope(|scope| {
        for (w, yc) in y_chunks.into_iter().enumerate() {
            let xc = &x[ranges[w].clone()];
            let shared = &shared;
            scope.spawn(move || {
                pin_to_cpu(w % logical_cpus.max(1));
                worker_loop(w, xc, yc, alg, params, shared);
            });
        }

        let mut run_once = || drive_one_iteration(alg, &shared, threads);
        body(&mut run_once);

        shared.shutdown.store(true, Ordering::Release);
        shared.barrier.wait(); // release workers into the shutdown check
    });
}

fn drive_one_iteration(alg: Algorithm, shared: &PoolShared, threads: usize) {
    shared.barrier.wait(); // A: workers enter pass 1
    shared.barrier.wait(); // B: pass-1 partials published
    match alg {
        Algorithm::ThreePassRecompute | Algorithm::ThreePassReload => {
            let mut mu = f32::NEG_INFINITY;
            for slot in &shared.partials[..threads] {
                mu = mu.max(f32::from_bits(slot.0.load(Ordering::Acquire)));
            }
            shared.mu_bits.store(mu.to_bits(), Ordering::Release);
            shared.barrier.wait(); // C: mu ready, workers enter pass 2
            shared.barrier.wait(); // D: pass-2 partials published
            let mut sigma = 0.0f32;
            for slot in &shared.partials[..threads] {
                sigma += f32::from_bits(slot.0.load(Ordering::Acquire));
            }
            shared.lambda_bits.store((1.0 / sigma).to_bits(), Ordering::Release);
            shared.barrier.wait(); // E: lambda ready, workers enter pass 3
            shared.barrier.wait(); // F: outputs written
        }
        Algorithm::TwoPass => {
            let mut state = ReductionState::IDENTITY;
            for slot in &shared.partials[..threads] {
                state.merge(ReductionState {
                    m_sum: f32::from_bits(slot.0.load(Ordering::Acquire)),
                    n_sum: f32::from_bits(slot.1.load(Ordering::Acquire)),
                });
            }
            shared.state_m_bits.store(state.m_sum.to_bits(), Ordering::Release);
            shared.state_n_bits.store(state.n_sum.to_bits(), Ordering::Release);
            shared.lambda_bits.store((1.0 / state.m_sum).to_bits(), Ordering::Release);
            shared.barrier.wait(); // C: state ready, workers enter pass 2
            shared.barrier.wait(); // D: outputs written
        }
    }
}

fn worker_loop(
    w: usize,
    xc: &[f32],
    yc: &mut [f32],
    alg: Algorithm,
    params: &TuningParams,
    shared: &PoolShared,
) {
    loop {
        shared.barrier.wait(); // A (or the shutdown release)
        if shared.shutdown.load(Ordering::Acquire) {
            return;
        }
        match alg {
            Algorithm::ThreePassRecompute => {
                let p = passes::max_pass(xc, params);
                shared.partials[w].0.store(p.to_bits(), Ordering::Release);
                shared.barrier.wait(); // B
                shared.barrier.wait(); // C
                let mu = f32::from_bits(shared.mu_bits.load(Ordering::Acquire));
                let s = passes::sum_exp_pass(xc, mu, params);
                shared.partials[w].0.store(s.to_bits(), Ordering::Release);
                shared.barrier.wait(); // D
                shared.barrier.wait(); // E
                let lambda = f32::from_bits(shared.lambda_bits.load(Ordering::Acquire));
                passes::write_exp_pass(xc, mu, lambda, yc, params);
                shared.barrier.wait(); // F
            }
            Algorithm::ThreePassReload => {
                let p = passes::max_pass(xc, params);
                shared.partials[w].0.store(p.to_bits(), Ordering::Release);
                shared.barrier.wait(); // B
                shared.barrier.wait(); // C
                let mu = f32::from_bits(shared.mu_bits.load(Ordering::Acquire));
                let s = passes::store_exp_sum_pass(xc, mu, yc, params);
                shared.partials[w].0.store(s.to_bits(), Ordering::Release);
                shared.barrier.wait(); // D
                shared.barrier.wait(); // E
                let lambda = f32::from_bits(shared.lambda_bits.load(Ordering::Acquire));
                passes::scale_pass(yc, lambda, params);
                shared.barrier.wait(); // F
            }
            Algorithm::TwoPass => {
                let st = passes::ext_accumulate_pass(xc, params);
                shared.partials[w].0.store(st.m_sum.to_bits(), Ordering::Release);
                shared.partials[w].1.store(st.n_sum.to_bits(), Ordering::Release);
                shared.barrier.wait(); // B
                shared.barrier.wait(); // C
                let state = ReductionState {
                    m_sum: f32::from_bits(shared.state_m_bits.load(Ordering::Acquire)),
                    n_sum: f32::from_bits(shared.state_n_bits.load(Ordering::Acquire)),
                };
                let lambda_sum = f32::from_bits(shared.lambda_bits.load(Ordering::Acquire));
                passes::ext_write_pass(xc, state, lambda_sum, yc, params);
                shared.barrier.wait(); // D
            }
        }
    }
}

/// Best-effort CPU pinning hint for scaling workers; silently a no-op where
/// the platform refuses or does not support it.
#[cfg(target_os = "linux")]
fn pin_to_cpu(cpu: usize) {
    unsafe {
        let mut set: libc::cpu_set_t = std::mem::zeroed();
        libc::CPU_SET(cpu % libc::CPU_SETSIZE as usize, &mut set);
        libc::sched_setaffinity(0, std::mem::size_of::<libc::cpu_set_t>(), &set);
    }
}

#[cfg(not(target_os = "linux"))]
fn pin_to_cpu(_cpu: usize) {}

/// Default thread counts for the scaling sweep: 1, doubling steps, the
/// physical core count, and the logical CPU count.
pub fn default_thread_counts(topology: &CacheTopology) -> Vec<usize> {
    let mut counts = vec![1usize];
    let mut t = 2;
    while t < topology.core_count {
        counts.push(t);
        t *= 2;
    }
    counts.push(topology.core_count);
    counts.push(topology.logical_cpu_count);
    counts.sort_unstable();
    counts.dedup();
    counts
}

/// Default geometric size grid for f32 workloads: doubling from 1 Ki
/// elements through every cache boundary, then three sizes at and beyond the
/// out-of-cache threshold (4x L3) in 5/4 steps — all capped so a size's
/// working set (`bytes_per_element * size`) stays within `mem_limit_bytes`.
///
/// Errors when the cap cannot accommodate three out-of-cache sizes; a sweep
/// that cannot reach past the last-level cache cannot say anything about
/// memory-bound behavior.
pub fn default_size_grid(
    topology: &CacheTopology,
    bytes_per_element: u64,
    mem_limit_bytes: u64,
) -> Result<Vec<usize>, BenchError> {
    let boundary = (topology.out_of_cache_bytes() / 4).max(1) as usize; // elements of 4 bytes
    let cap = (mem_limit_bytes / bytes_per_element.max(1)) as usize;
    let mut sizes = Vec::new();
    let mut s = 1024usize;
    while s < boundary {
        sizes.push(s);
        s = s.saturating_mul(2);
    }
    for step in [(1, 1), (5, 4), (25, 16)] {
        let beyond = boundary.saturating_mul(step.0) / step.1;
        sizes.push(beyond);
    }
    sizes.retain(|&v| v <= cap);
    sizes.dedup();
    let out_of_cache = sizes.iter().filter(|&&v| v >= boundary).count();
    if out_of_cache < 3 {
        return Err(BenchError::InvalidConfig(format!(
            "memory limit {mem_limit_bytes} B allows only {out_of_cache} out-of-cache sizes \
             (need 3 of >= {boundary} elements at {bytes_per_element} B/element)"
        )));
    }
    Ok(sizes)
}

/// `MemAvailable` from /proc/meminfo, if the platform exposes it.
pub fn available_memory_bytes() -> Option<u64> {
    let text = std::fs::read_to_string("/proc/meminfo").ok()?;
    for line in text.lines() {
        if let Some(rest) = line.strip_prefix("MemAvailable:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}

/// The sweep's summary statistic for the out-of-cache regime: the median
/// over qualifying sizes of (two-pass time / three-pass-reload time), taken
/// from single-threaded records at sizes of at least `min_size_elements`.
/// `None` when no size has both records.
pub fn two_pass_reload_ratio(records: &[BenchRecord], min_size_elements: usize) -> Option<f64> {
    let mut ratios = Vec::new();
    let mut sizes: Vec<usize> = records
        .iter()
        .filter(|r| r.size_elements >= min_size_elements && r.threads == 1)
        .map(|r| r.size_elements)
        .collect();
    sizes.sort_unstable();
    sizes.dedup();
    for size in sizes {
        let find = |w: Workload| {
            records
                .iter()
                .find(|r| r.workload == w && r.size_elements == size && r.threads == 1)
                .map(|r| r.median_time_s)
        };
        if let (Some(two), Some(reload)) =
            (find(Workload::SoftmaxTwoPass), find(Workload::SoftmaxReload))
        {
            ratios.push(two / reload);
        }
    }
    if ratios.is_empty() {
        None
    } else {
        Some(median(ratios))
    }
}

fn median(mut xs: Vec<f64>) -> f64 {
    assert!(!xs.is_empty());
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    if n % 2 == 1 {
        xs[n / 2]
    } else {
        0.5 * (xs[n / 2 - 1] + xs[n / 2])
    }
}

fn alloc_f32(n: usize) -> Result<Vec<f32>, BenchError> {
    let mut v: Vec<f32> = Vec::new();
    v.try_reserve_exact(n).map_err(|_| BenchError::Allocation { bytes: n as u64 * 4 })?;
    v.resize(n, 0.0);
    Ok(v)
}

fn alloc_f64(n: usize) -> Result<Vec<f64>, BenchError> {
    let mut v: Vec<f64> = Vec::new();
    v.try_reserve_exact(n).map_err(|_| BenchError::Allocation { bytes: n as u64 * 8 })?;
    v.resize(n, 0.0);
    Ok(v)
}

/// Deterministic softmax-score pattern: a sawtooth over [-25, +24.95]. The
/// kernels are branch-free, so timing is insensitive to the values; the fill
/// doubles as the one-time input pre-touch.
fn fill_scores(x: &mut [f32]) {
    for (i, v) in x.iter_mut().enumerate() {
        *v = ((i % 1000) as f32) * 0.05 - 25.0;
    }
}

fn fill_stream(a: &mut [f64]) {
    for (i, v) in a.iter_mut().enumerate() {
        *v = 1.0 + (i % 7) as f64 * 0.5;
    }
}
