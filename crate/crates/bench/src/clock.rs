//! Wall-clock abstraction so the measurement loop can be unit-tested with
//! scripted times.

use std::sync::Mutex;
use std::time::{Duration, Instant};

/// A monotonic time source. `now` returns the elapsed time since some fixed
/// origin; only differences between readings are meaningful.
pub trait Clock {
    fn now(&self) -> Duration;
}

/// The production clock: `std::time::Instant`, monotonic and high-resolution.
pub struct MonotonicClock {
    origin: Instant,
}

impl MonotonicClock {
    pub fn new() -> Self {
        MonotonicClock { origin: Instant::now() }
    }
}

impl Default for MonotonicClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for MonotonicClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Test clock that replays a scripted sequence of *interval lengths*: the
/// `k`-th call to `now` returns the sum of the first `k` scripted intervals,
/// so consecutive readings are `intervals[k]` apart. Running out of script is
/// a test bug and panics.
pub struct ScriptedClock {
    state: Mutex<ScriptState>,
}

struct ScriptState {
    intervals: Vec<Duration>,
    next: usize,
    elapsed: Duration,
}

impl ScriptedClock {
    pub fn new(intervals: Vec<Duration>) -> Self {
        ScriptedClock {
            state: Mutex::new(ScriptState { intervals, next: 0, elapsed: Duration::ZERO }),
        }
    }

    /// Convenience: intervals given in seconds.
    pub fn from_seconds(secs: &[f64]) -> Self {
        Self::new(secs.iter().map(|s| Duration::from_secs_f64(*s)).collect())
    }
}

impl Clock for ScriptedClock {
    fn now(&self) -> Duration {
        let mut st = self.state.lock().unwrap();
        let i = st.next;
        assert!(i < st.intervals.len(), "scripted clock exhausted after {i} readings");
        st.next += 1;
        st.elapsed += st.intervals[i];
        st.elapsed
    }
}
