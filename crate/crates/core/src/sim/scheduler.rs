use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Virtual time in integer nanoseconds.
pub type SimTime = u64;

pub fn seconds_to_ns(s: f64) -> SimTime {
    (s * 1e9).round() as SimTime
}

pub fn ns_to_seconds(t: SimTime) -> f64 {
    t as f64 * 1e-9
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimEvent<A> {
    pub time: SimTime,
    pub seq: u64,
    pub node: usize,
    pub action: A,
}

impl<A: Eq> Ord for SimEvent<A> {
    fn cmp(&self, other: &Self) -> Ordering {
        // BinaryHeap is a max-heap; earliest (time, seq) must come out first
        (other.time, other.seq).cmp(&(self.time, self.seq))
    }
}

impl<A: Eq> PartialOrd for SimEvent<A> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Event queue dispatching in `(time, seq)` order. Scheduling in the past
/// is a logic error and panics.
#[derive(Debug)]
pub struct Scheduler<A> {
    heap: BinaryHeap<SimEvent<A>>,
    now: SimTime,
    next_seq: u64,
    dispatched: u64,
}

impl<A: Eq> Default for Scheduler<A> {
    fn default() -> Self {
        Scheduler {
            heap: BinaryHeap::new(),
            now: 0,
            next_seq: 0,
            dispatched: 0,
        }
    }
}

impl<A: Eq> Scheduler<A> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule_at(&mut self, time: SimTime, node: usize, action: A) -> u64 {
        assert!(
            time >= self.now,
            "event scheduled at {time} before now {}",
            self.now
        );
        let seq = self.next_seq;
        self.next_seq += 1;
        self.heap.push(SimEvent {
            time,
            seq,
            node,
            action,
        });
        seq
    }

    pub fn schedule_in(&mut self, delay: SimTime, node: usize, action: A) -> u64 {
        self.schedule_at(self.now + delay, node, action)
    }

    pub fn pop(&mut self) -> Option<SimEvent<A>> {
        let ev = self.heap.pop()?;
        debug_assert!(ev.time >= self.now);
        self.now = ev.time;
        self.dispatched += 1;
        Some(ev)
    }
}
