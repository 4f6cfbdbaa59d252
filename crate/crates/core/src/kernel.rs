//! Discrete-event scheduling and seedable random streams.
//!
//! Every run owns exactly one [`EventQueue`]. Events are ordered by
//! `(fire_time, sequence)`, where `sequence` is a counter assigned at
//! scheduling time, so events sharing a timestamp fire in FIFO order.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Seconds per simulated day.
pub const SECONDS_PER_DAY: f64 = 86_400.0;

/// Simulated seconds since `t = 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SimTime(f64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0.0);

    /// Returns `None` for negative or non-finite values.
    pub fn new(seconds: f64) -> Option<Self> {
        (seconds.is_finite() && seconds >= 0.0).then_some(SimTime(seconds))
    }

    /// Panics on negative or non-finite input.
    pub fn from_secs(seconds: f64) -> Self {
        Self::new(seconds).unwrap_or_else(|| panic!("invalid simulation time {seconds}"))
    }

    pub fn secs(self) -> f64 {
        self.0
    }

    fn total_cmp(&self, other: &Self) -> Ordering {
        self.0.total_cmp(&other.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum KernelError {
    #[error("event scheduled at t={fire_time} but the clock is already at t={now}")]
    PastEvent { fire_time: f64, now: f64 },
    #[error("inverted range: lo={lo} > hi={hi}")]
    InvertedRange { lo: f64, hi: f64 },
}

/// A queued event with its dispatch key.
#[derive(Debug, Clone)]
pub struct ScheduledEvent<P> {
    pub fire_time: SimTime,
    pub sequence: u64,
    pub payload: P,
}

struct HeapEntry<P>(ScheduledEvent<P>);

impl<P> PartialEq for HeapEntry<P> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<P> Eq for HeapEntry<P> {}

impl<P> PartialOrd for HeapEntry<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for HeapEntry<P> {
    // BinaryHeap is a max-heap; reverse so the earliest (time, sequence) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .0
            .fire_time
            .total_cmp(&self.0.fire_time)
            .then_with(|| other.0.sequence.cmp(&self.0.sequence))
    }
}

/// Single-threaded future event list.
pub struct EventQueue<P> {
    heap: BinaryHeap<HeapEntry<P>>,
    now: SimTime,
    next_sequence: u64,
    dispatched: u64,
}

impl<P> Default for EventQueue<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> EventQueue<P> {
    pub fn new() -> Self {
        EventQueue {
            heap: BinaryHeap::new(),
            now: SimTime::ZERO,
            next_sequence: 0,
            dispatched: 0,
        }
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    pub fn len(&self) -> usize {
        self.heap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.heap.is_empty()
    }

    /// Total number of events dispatched so far.
    pub fn dispatched(&self) -> u64 {
        self.dispatched
    }

    /// Queues `payload` at `fire_time` and returns the sequence number assigned to it.
    pub fn schedule(&mut self, fire_time: SimTime, payload: P) -> Result<u64, KernelError> {
        if fire_time < self.now {
            return Err(KernelError::PastEvent {
                fire_time: fire_time.secs(),
                now: self.now.secs(),
            });
        }
        let sequence = self.next_sequence;
        self.next_sequence += 1;
        self.heap.push(HeapEntry(ScheduledEvent {
            fire_time,
            sequence,
            payload,
        }));
        Ok(sequence)
    }

    /// Fire time of the next queued event.
    pub fn peek_time(&self) -> Option<SimTime> {
        self.heap.peek().map(|e| e.0.fire_time)
    }

    /// Pops the next event if it fires at or before `limit`, advancing the clock to it.
    pub fn pop_until(&mut self, limit: SimTime) -> Option<ScheduledEvent<P>> {
        if self.peek_time()? > limit {
            return None;
        }
        let HeapEntry(event) = self.heap.pop()?;
        self.now = event.fire_time;
        self.dispatched += 1;
        Some(event)
    }

    /// Dispatches every event with `fire_time <= t_end` in `(time, sequence)`
    /// order, then sets the clock to `t_end`. The handler may schedule further
    /// events through the queue reference it receives.
    ///
    /// Returns the number of events dispatched by this call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        F: FnMut(&mut Self, ScheduledEvent<P>),
    {
        let t_end = if t_end < self.now { self.now } else { t_end };
        let start = self.dispatched;
        while let Some(event) = self.pop_until(t_end) {
            handler(self, event);
        }
        self.now = t_end;
        self.dispatched - start
    }
}

/// Names the purpose of a random stream. The label and the master seed
/// together fully determine the draw sequence.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum StreamId {
    Precompute,
    Generator,
    Population,
    Mobility(usize),
    Dissemination,
    Custom(String),
}

impl StreamId {
    pub fn label(&self) -> String {
        match self {
            StreamId::Precompute => "precompute".into(),
            StreamId::Generator => "generator".into(),
            StreamId::Population => "population".into(),
            StreamId::Mobility(node) => format!("mobility.node_{node}"),
            StreamId::Dissemination => "dissemination".into(),
            StreamId::Custom(label) => label.clone(),
        }
    }
}

// 64-bit FNV-1a; stable across platforms and releases, unlike std's hasher.
fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// A reproducible random stream: ChaCha8 keyed by the master seed, with the
/// ChaCha stream number derived from the purpose label.
#[derive(Debug, Clone)]
pub struct RngStream {
    id: StreamId,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn new(master_seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(fnv1a(id.label().as_bytes()));
        RngStream { id, rng }
    }

    pub fn id(&self) -> &StreamId {
        &self.id
    }

    /// Uniform draw on `[lo, hi]`; `lo == hi` returns `lo`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> Result<f64, KernelError> {
        if lo > hi || lo.is_nan() || hi.is_nan() {
            return Err(KernelError::InvertedRange { lo, hi });
        }
        if lo == hi {
            return Ok(lo);
        }
        let u: f64 = self.rng.random();
        Ok((lo + u * (hi - lo)).min(hi))
    }

    /// Uniform draw on `[0, 1)`.
    pub fn unit(&mut self) -> f64 {
        self.rng.random()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.unit() < p
    }

    /// Uniform integer on the inclusive range `[lo, hi]`.
    pub fn int_inclusive(&mut self, lo: u32, hi: u32) -> u32 {
        self.rng.random_range(lo..=hi)
    }

    /// Uniform index below `n` (`n > 0`).
    pub fn index(&mut self, n: usize) -> usize {
        self.rng.random_range(0..n)
    }

    /// Direct access for `rand_distr` samplers.
    pub fn rng_mut(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }
}
