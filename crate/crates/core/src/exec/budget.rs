use std::fmt;
use std::sync::{Arc, Mutex};
use std::time::{Duration, Instant};

/// Monotonic time source.
pub trait Clock: Send + Sync + fmt::Debug {
    fn now(&self) -> Duration;
}

#[derive(Debug)]
pub struct SystemClock {
    origin: Instant,
}

impl SystemClock {
    pub fn new() -> Self {
        Self {
            origin: Instant::now(),
        }
    }
}

impl Default for SystemClock {
    fn default() -> Self {
        Self::new()
    }
}

impl Clock for SystemClock {
    fn now(&self) -> Duration {
        self.origin.elapsed()
    }
}

/// Clock that only moves when told to; scripted runners advance it by the
/// scripted duration of each execution.
#[derive(Debug, Default)]
pub struct VirtualClock {
    now: Mutex<Duration>,
}

impl VirtualClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn advance(&self, by: Duration) {
        *self.now.lock().unwrap_or_else(|e| e.into_inner()) += by;
    }
}

impl Clock for VirtualClock {
    fn now(&self) -> Duration {
        *self.now.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Global wall-clock budget of a run.
#[derive(Debug)]
pub struct Budget {
    clock: Arc<dyn Clock>,
    start: Duration,
    total: Duration,
    /// Time spent by executions replayed from a previous process.
    carried: Mutex<Duration>,
}

impl Budget {
    pub fn new(clock: Arc<dyn Clock>, total: Duration) -> Self {
        let start = clock.now();
        Self {
            clock,
            start,
            total,
            carried: Mutex::new(Duration::ZERO),
        }
    }

    pub fn elapsed(&self) -> Duration {
        let carried = *self.carried.lock().unwrap_or_else(|e| e.into_inner());
        self.clock.now().saturating_sub(self.start) + carried
    }

    pub fn remaining(&self) -> Duration {
        self.total.saturating_sub(self.elapsed())
    }

    pub fn exhausted(&self) -> bool {
        self.elapsed() >= self.total
    }

    pub fn carry(&self, spent: Duration) {
        *self.carried.lock().unwrap_or_else(|e| e.into_inner()) += spent;
    }
}
