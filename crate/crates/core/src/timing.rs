//! Wall-clock attribution of solver time to kernel categories.

use std::cell::Cell;
use std::collections::BTreeMap;
use std::fmt;
use std::time::{Duration, Instant};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Kernel {
    SpMV,
    GemvTrans,
    Norm,
    GemvNoTrans,
    Other,
}

impl Kernel {
    pub const ALL: [Kernel; 5] = [
        Kernel::SpMV,
        Kernel::GemvTrans,
        Kernel::Norm,
        Kernel::GemvNoTrans,
        Kernel::Other,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Kernel::SpMV => "spmv",
            Kernel::GemvTrans => "gemv_trans",
            Kernel::Norm => "norm",
            Kernel::GemvNoTrans => "gemv_notrans",
            Kernel::Other => "other",
        }
    }

    fn slot(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Scoped accumulator shared by reference between a driver and the
/// operator closures it calls. Timed regions must not nest.
#[derive(Debug, Default)]
pub struct KernelTimer {
    bins: [Cell<Duration>; 5],
    calls: [Cell<u64>; 5],
}

impl KernelTimer {
    pub fn new() -> Self {
        Self::default()
    }

    #[inline]
    pub fn time<R>(&self, kernel: Kernel, f: impl FnOnce() -> R) -> R {
        let start = Instant::now();
        let out = f();
        let slot = kernel.slot();
        self.bins[slot].set(self.bins[slot].get() + start.elapsed());
        self.calls[slot].set(self.calls[slot].get() + 1);
        out
    }

    pub fn calls(&self, kernel: Kernel) -> u64 {
        self.calls[kernel.slot()].get()
    }

    pub fn elapsed(&self, kernel: Kernel) -> Duration {
        self.bins[kernel.slot()].get()
    }

    /// Close the books: time not attributed to a kernel goes to `Other`.
    pub fn finish(&self, total: Duration) -> KernelTimes {
        let mut seconds = BTreeMap::new();
        let mut attributed = Duration::ZERO;
        for k in [Kernel::SpMV, Kernel::GemvTrans, Kernel::Norm, Kernel::GemvNoTrans] {
            attributed += self.elapsed(k);
            seconds.insert(k, self.elapsed(k).as_secs_f64());
        }
        let other = total.saturating_sub(attributed);
        seconds.insert(Kernel::Other, other.as_secs_f64());
        KernelTimes {
            seconds,
            calls: Kernel::ALL.iter().map(|&k| (k, self.calls(k))).collect(),
        }
    }
}

/// Per-category seconds and call counts for one solve.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KernelTimes {
    pub seconds: BTreeMap<Kernel, f64>,
    pub calls: BTreeMap<Kernel, u64>,
}

impl KernelTimes {
    pub fn get(&self, k: Kernel) -> f64 {
        self.seconds.get(&k).copied().unwrap_or(0.0)
    }

    pub fn total(&self) -> f64 {
        self.seconds.values().sum()
    }

    pub fn merge(&mut self, other: &KernelTimes) {
        for (&k, &s) in &other.seconds {
            *self.seconds.entry(k).or_default() += s;
        }
        for (&k, &c) in &other.calls {
            *self.calls.entry(k).or_default() += c;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn finish_partitions_total() {
        let t = KernelTimer::new();
        t.time(Kernel::SpMV, || std::thread::sleep(Duration::from_millis(2)));
        t.time(Kernel::Norm, || ());
        let total = Duration::from_millis(10);
        let times = t.finish(total);
        assert!((times.total() - total.as_secs_f64()).abs() < 1e-9);
        assert_eq!(times.calls[&Kernel::SpMV], 1);
        assert_eq!(times.seconds.len(), 5);
    }
}
