//! The measurable workloads: the three softmax algorithms, their individual
//! passes, and the streaming-bandwidth baselines.

use std::fmt;
use std::str::FromStr;

/// Everything the harness can time. Pass workloads isolate one pass of an
/// algorithm (with any scalars it consumes precomputed outside timing);
/// stream workloads are the double-precision bandwidth baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Workload {
    SoftmaxRecompute,
    SoftmaxReload,
    SoftmaxTwoPass,
    Pass1Max,
    Pass2Recompute,
    Pass2Reload,
    Pass3Recompute,
    Pass3Reload,
    TwoPassP1,
    TwoPassP2,
    StreamCopy,
    StreamScale,
    StreamScaleInplace,
}

impl Workload {
    pub const ALL: [Workload; 13] = [
        Workload::SoftmaxRecompute,
        Workload::SoftmaxReload,
        Workload::SoftmaxTwoPass,
        Workload::Pass1Max,
        Workload::Pass2Recompute,
        Workload::Pass2Reload,
        Workload::Pass3Recompute,
        Workload::Pass3Reload,
        Workload::TwoPassP1,
        Workload::TwoPassP2,
        Workload::StreamCopy,
        Workload::StreamScale,
        Workload::StreamScaleInplace,
    ];

    /// The three end-to-end softmax algorithms.
    pub const SOFTMAX: [Workload; 3] =
        [Workload::SoftmaxRecompute, Workload::SoftmaxReload, Workload::SoftmaxTwoPass];

    /// The streaming-bandwidth baselines.
    pub const STREAM: [Workload; 3] =
        [Workload::StreamCopy, Workload::StreamScale, Workload::StreamScaleInplace];

    pub fn name(self) -> &'static str {
        match self {
            Workload::SoftmaxRecompute => "softmax_recompute",
            Workload::SoftmaxReload => "softmax_reload",
            Workload::SoftmaxTwoPass => "softmax_two_pass",
            Workload::Pass1Max => "pass1_max",
            Workload::Pass2Recompute => "pass2_recompute",
            Workload::Pass2Reload => "pass2_reload",
            Workload::Pass3Recompute => "pass3_recompute",
            Workload::Pass3Reload => "pass3_reload",
            Workload::TwoPassP1 => "two_pass_p1",
            Workload::TwoPassP2 => "two_pass_p2",
            Workload::StreamCopy => "stream_copy",
            Workload::StreamScale => "stream_scale",
            Workload::StreamScaleInplace => "stream_scale_inplace",
        }
    }

    pub fn from_name(name: &str) -> Option<Workload> {
        Workload::ALL.into_iter().find(|w| w.name() == name)
    }

    pub fn is_stream(self) -> bool {
        matches!(
            self,
            Workload::StreamCopy | Workload::StreamScale | Workload::StreamScaleInplace
        )
    }

    pub fn is_softmax(self) -> bool {
        matches!(
            self,
            Workload::SoftmaxRecompute | Workload::SoftmaxReload | Workload::SoftmaxTwoPass
        )
    }

    /// Size of one logical element: the softmax kernels are single precision,
    /// the stream baselines double precision.
    pub fn element_bytes(self) -> u64 {
        if self.is_stream() {
            8
        } else {
            4
        }
    }

    /// Whether the workload writes an output array (and thus participates in
    /// the per-iteration output-eviction protocol).
    pub fn has_output(self) -> bool {
        !matches!(self, Workload::Pass1Max | Workload::Pass2Recompute | Workload::TwoPassP1)
    }

    /// Whether the workload mutates its output in place (so the buffer must
    /// be refilled, untimed, before each iteration to keep values bounded).
    pub fn is_in_place(self) -> bool {
        matches!(self, Workload::Pass3Reload | Workload::StreamScaleInplace)
    }

    /// Only the end-to-end softmax algorithms have a parallel decomposition;
    /// single passes and stream baselines are timed single-threaded.
    pub fn supports_threads(self) -> bool {
        self.is_softmax()
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Workload {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Workload::from_name(s).ok_or_else(|| {
            let names: Vec<&str> = Workload::ALL.iter().map(|w| w.name()).collect();
            format!("unknown workload {s:?}; expected one of: {}", names.join(", "))
        })
    }
}
