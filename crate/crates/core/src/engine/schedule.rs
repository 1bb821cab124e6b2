use std::cmp::{Ordering, Reverse};
use std::collections::BinaryHeap;

/// Relative window inside which two branch times are one simultaneous batch.
pub const SIMULTANEITY_TOLERANCE: f64 = 1e-12;

/// Width of the simultaneity window at time `t`, in the units of `tau`.
///
/// The window is `1e-12 tau` near the origin and grows with `|t|` so that it
/// never drops below a few ulps of the event times themselves.
pub fn simultaneity_window(t: f64, tau: f64) -> f64 {
    SIMULTANEITY_TOLERANCE * tau.max(t.abs())
}

#[derive(Debug, Clone, Copy)]
struct Entry<K> {
    time: f64,
    key: K,
}

impl<K: Ord> PartialEq for Entry<K> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<K: Ord> Eq for Entry<K> {}

impl<K: Ord> PartialOrd for Entry<K> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<K: Ord> Ord for Entry<K> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.time.total_cmp(&other.time).then_with(|| self.key.cmp(&other.key))
    }
}

/// Min-queue of deterministic branch events.
///
/// Events pop in non-decreasing time; ties (and near-ties within the
/// simultaneity window) are delivered as one batch sorted by key.
#[derive(Debug, Clone)]
pub struct EventSchedule<K> {
    heap: BinaryHeap<Reverse<Entry<K>>>,
}

impl<K: Ord + Copy> Default for EventSchedule<K> {
    fn default() -> Self {
        Self::new()
    }
}

impl<K: Ord + Copy> EventSchedule<K> {
    pub fn new() -> Self {
        Self { heap: BinaryHeap::new() }
    }

    pub fn with_capacity(n: usize) -> Self {
        Self { heap: BinaryHeap::with_capacity(n) }
    }

    pub fn push(&mut self, time: f64, key: K) {
        debug_assert!(time.is_finite());
        self.heap.push(Reverse(Entry { time, key }));
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    pub fn peek_time(&self) -> Option<f64> {
        self.heap.peek().map(|e| e.0.time)
    }

    pub fn pop(&mut self) -> Option<(f64, K)> {
        self.heap.pop().map(|Reverse(e)| (e.time, e.key))
    }

    /// Pops every event within `window` of the earliest one, provided the
    /// earliest one is not later than `limit`. The batch is sorted by key.
    pub fn pop_batch(&mut self, limit: f64, window: impl Fn(f64) -> f64, out: &mut Vec<(f64, K)>) -> Option<f64> {
        out.clear();
        let first = self.peek_time()?;
        if first > limit {
            return None;
        }
        let end = first + window(first);
        while let Some(t) = self.peek_time() {
            if t > end {
                break;
            }
            out.push(self.pop().expect("peeked"));
        }
        out.sort_by(|x, y| x.1.cmp(&y.1));
        Some(first)
    }
}
