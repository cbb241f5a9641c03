//! Virtual-time event engine and seeded random streams.
//!
//! Time is kept in integer microseconds. Events are ordered by
//! `(fire_at, seq)`, where `seq` is assigned at scheduling time, so two
//! events due at the same instant fire in the order they were scheduled.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

/// A point (or span) of virtual time in microseconds.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct SimTime(pub u64);

impl SimTime {
    pub const ZERO: SimTime = SimTime(0);

    pub const fn from_micros(us: u64) -> Self {
        SimTime(us)
    }

    pub fn from_secs_f64(secs: f64) -> Self {
        SimTime((secs * 1e6).round() as u64)
    }

    pub const fn micros(self) -> u64 {
        self.0
    }

    pub fn as_secs_f64(self) -> f64 {
        self.0 as f64 / 1e6
    }

    pub fn saturating_sub(self, other: SimTime) -> SimTime {
        SimTime(self.0.saturating_sub(other.0))
    }
}

impl std::ops::Add for SimTime {
    type Output = SimTime;
    fn add(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 + rhs.0)
    }
}

impl std::ops::AddAssign for SimTime {
    fn add_assign(&mut self, rhs: SimTime) {
        self.0 += rhs.0;
    }
}

impl std::ops::Sub for SimTime {
    type Output = SimTime;
    fn sub(self, rhs: SimTime) -> SimTime {
        SimTime(self.0 - rhs.0)
    }
}

impl fmt::Display for SimTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}us", self.0)
    }
}

/// Station identifier. Transmitters come first, receivers after them.
pub type StationId = u32;

/// Who an event is addressed to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Target {
    Station(StationId),
    Medium,
    Controller,
}

/// Handle returned by [`Scheduler::schedule`]; the event's sequence number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EventId(pub u64);

#[derive(Debug, Clone)]
pub struct Event<P> {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: Target,
    pub payload: P,
}

impl<P> Event<P> {
    pub fn id(&self) -> EventId {
        EventId(self.seq)
    }
}

impl<P> PartialEq for Event<P> {
    fn eq(&self, other: &Self) -> bool {
        self.seq == other.seq
    }
}

impl<P> Eq for Event<P> {}

impl<P> PartialOrd for Event<P> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<P> Ord for Event<P> {
    // BinaryHeap is a max-heap; invert so the earliest (fire_at, seq) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        (other.fire_at, other.seq).cmp(&(self.fire_at, self.seq))
    }
}

/// One delivered event as seen by the trace recorder.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceRecord {
    pub fire_at: SimTime,
    pub seq: u64,
    pub target: Target,
    pub tag: &'static str,
}

/// Gives a short stable name to a payload for event traces.
pub trait EventTag {
    fn tag(&self) -> &'static str;
}

/// Time-ordered event queue with cancellation.
///
/// Cancelled events stay in the heap and are discarded when they reach the
/// front. Completion (fired or cancelled) is tracked in a bitset indexed by
/// sequence number, which makes `cancel` exact without a hash set.
pub struct Scheduler<P> {
    now: SimTime,
    next_seq: u64,
    heap: BinaryHeap<Event<P>>,
    done: Vec<u64>,
    fired: u64,
    trace: Option<Vec<TraceRecord>>,
}

impl<P> Default for Scheduler<P> {
    fn default() -> Self {
        Self::new()
    }
}

impl<P> Scheduler<P> {
    pub fn new() -> Self {
        Scheduler {
            now: SimTime::ZERO,
            next_seq: 0,
            heap: BinaryHeap::new(),
            done: Vec::new(),
            fired: 0,
            trace: None,
        }
    }

    /// Record every delivered event in an in-memory trace.
    pub fn enable_trace(&mut self) {
        self.trace = Some(Vec::new());
    }

    pub fn take_trace(&mut self) -> Option<Vec<TraceRecord>> {
        self.trace.take()
    }

    pub fn now(&self) -> SimTime {
        self.now
    }

    /// Total number of events delivered so far.
    pub fn fired(&self) -> u64 {
        self.fired
    }

    pub fn pending(&self) -> usize {
        self.heap.len()
    }

    pub fn schedule(&mut self, delay: SimTime, target: Target, payload: P) -> EventId {
        self.schedule_at(self.now + delay, target, payload)
    }

    /// Schedule at an absolute time. Times in the past are clamped to `now`.
    pub fn schedule_at(&mut self, at: SimTime, target: Target, payload: P) -> EventId {
        let seq = self.next_seq;
        self.next_seq += 1;
        let word = (seq / 64) as usize;
        if word >= self.done.len() {
            self.done.resize(word + 1, 0);
        }
        self.heap.push(Event {
            fire_at: at.max(self.now),
            seq,
            target,
            payload,
        });
        EventId(seq)
    }

    fn is_done(&self, seq: u64) -> bool {
        self.done[(seq / 64) as usize] & (1 << (seq % 64)) != 0
    }

    fn mark_done(&mut self, seq: u64) {
        self.done[(seq / 64) as usize] |= 1 << (seq % 64);
    }

    /// Returns true iff the event existed and had neither fired nor been
    /// cancelled before.
    pub fn cancel(&mut self, id: EventId) -> bool {
        if id.0 >= self.next_seq || self.is_done(id.0) {
            return false;
        }
        self.mark_done(id.0);
        true
    }

    /// Pop the next live event due at or before `t_end`, advancing `now`.
    pub fn next_until(&mut self, t_end: SimTime) -> Option<Event<P>>
    where
        P: EventTag,
    {
        while let Some(top) = self.heap.peek() {
            if top.fire_at > t_end {
                return None;
            }
            let ev = self.heap.pop().expect("peeked");
            if self.is_done(ev.seq) {
                continue;
            }
            self.mark_done(ev.seq);
            debug_assert!(ev.fire_at >= self.now);
            self.now = ev.fire_at;
            self.fired += 1;
            if let Some(trace) = self.trace.as_mut() {
                trace.push(TraceRecord {
                    fire_at: ev.fire_at,
                    seq: ev.seq,
                    target: ev.target,
                    tag: ev.payload.tag(),
                });
            }
            return Some(ev);
        }
        None
    }

    /// Deliver every event with `fire_at <= t_end` to `handler` in
    /// `(fire_at, seq)` order, then set `now = t_end`. Returns how many
    /// events fired during this call.
    pub fn run_until<F>(&mut self, t_end: SimTime, mut handler: F) -> u64
    where
        P: EventTag,
        F: FnMut(&mut Scheduler<P>, Event<P>),
    {
        let before = self.fired;
        while let Some(ev) = self.next_until(t_end) {
            handler(self, ev);
        }
        self.now = self.now.max(t_end);
        self.fired - before
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum RandomError {
    #[error("pareto shape must be > 1 for a finite mean, got {0}")]
    InvalidShape(f64),
    #[error("pareto mean must be positive, got {0}")]
    InvalidMean(f64),
    #[error("empty integer range [{lo}, {hi}]")]
    EmptyRange { lo: i64, hi: i64 },
}

/// What a random stream is used for; part of the stream identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u8)]
pub enum StreamPurpose {
    Backoff = 1,
    Privilege = 2,
    Traffic = 3,
    Topology = 4,
}

/// Identity of a random stream within a simulation campaign.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StreamId {
    pub run: u32,
    pub station: StationId,
    pub purpose: StreamPurpose,
}

/// SplitMix64 finalizer; used to derive per-run seeds.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed for run `run` of a campaign with base seed `seed`.
pub fn run_seed(seed: u64, run: u32) -> u64 {
    mix64(seed ^ mix64(u64::from(run).wrapping_add(0xA5A5_5A5A)))
}

/// A reproducible random stream: ChaCha8 keyed by the run seed, with the
/// (station, purpose) pair selecting an independent ChaCha stream.
/// Adding stations never perturbs the draws of existing ones.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64, id: StreamId) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(run_seed(seed, id.run));
        rng.set_stream((u64::from(id.station) << 8) | id.purpose as u64);
        RandomStream { rng }
    }

    /// Uniform integer in `[lo, hi]`, inclusive.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> Result<i64, RandomError> {
        if lo > hi {
            return Err(RandomError::EmptyRange { lo, hi });
        }
        Ok(self.rng.gen_range(lo..=hi))
    }

    /// Uniform real in `[0, 1)`.
    pub fn uniform_f64(&mut self) -> f64 {
        self.rng.gen::<f64>()
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        if p <= 0.0 {
            return false;
        }
        if p >= 1.0 {
            return true;
        }
        self.uniform_f64() < p
    }

    /// Pareto sample (µs) with the given mean and shape.
    pub fn pareto(&mut self, mean: f64, shape: f64) -> Result<f64, RandomError> {
        let scale = pareto_scale(mean, shape)?;
        // 1 - U lies in (0, 1], so the power is finite.
        let u = 1.0 - self.uniform_f64();
        Ok(scale / u.powf(1.0 / shape))
    }
}

/// Scale (minimum value) of a Pareto distribution with the given mean.
pub fn pareto_scale(mean: f64, shape: f64) -> Result<f64, RandomError> {
    if !(shape > 1.0) || !shape.is_finite() {
        return Err(RandomError::InvalidShape(shape));
    }
    if !(mean > 0.0) || !mean.is_finite() {
        return Err(RandomError::InvalidMean(mean));
    }
    Ok(mean * (shape - 1.0) / shape)
}
