//! Packet arrival processes.

use thiserror::Error;

use crate::sim::{RandomError, RandomStream, SimTime};

pub const DEFAULT_ON_MEAN_US: f64 = 50_000.0;
pub const DEFAULT_OFF_MEAN_US: f64 = 50_000.0;
pub const DEFAULT_PARETO_SHAPE: f64 = 1.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum TrafficKind {
    /// Saturated source: the queue is refilled as soon as it shrinks.
    #[default]
    FullBuffer,
    /// Constant-rate arrivals during Pareto-distributed on periods.
    ParetoOnOff,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrafficSpec {
    pub kind: TrafficKind,
    pub packet_size: u32,
    /// Sending rate during on periods, bits per second.
    pub rate: f64,
    pub on_mean_us: f64,
    pub off_mean_us: f64,
    pub shape: f64,
}

impl Default for TrafficSpec {
    fn default() -> Self {
        TrafficSpec {
            kind: TrafficKind::FullBuffer,
            packet_size: 500,
            rate: 1e6,
            on_mean_us: DEFAULT_ON_MEAN_US,
            off_mean_us: DEFAULT_OFF_MEAN_US,
            shape: DEFAULT_PARETO_SHAPE,
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum TrafficError {
    #[error("packet size must be positive")]
    ZeroPacketSize,
    #[error("sending rate must be positive, got {0}")]
    InvalidRate(f64),
    #[error(transparent)]
    Random(#[from] RandomError),
}

impl TrafficSpec {
    pub fn full_buffer(packet_size: u32) -> Self {
        TrafficSpec {
            kind: TrafficKind::FullBuffer,
            packet_size,
            ..Default::default()
        }
    }

    pub fn pareto(packet_size: u32, rate: f64) -> Self {
        TrafficSpec {
            kind: TrafficKind::ParetoOnOff,
            packet_size,
            rate,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), TrafficError> {
        if self.packet_size == 0 {
            return Err(TrafficError::ZeroPacketSize);
        }
        if self.kind == TrafficKind::ParetoOnOff {
            if !(self.rate > 0.0) || !self.rate.is_finite() {
                return Err(TrafficError::InvalidRate(self.rate));
            }
            crate::sim::pareto_scale(self.on_mean_us, self.shape)?;
            crate::sim::pareto_scale(self.off_mean_us, self.shape)?;
        }
        Ok(())
    }

    /// Time between packets during an on period, in µs.
    pub fn inter_arrival_us(&self) -> f64 {
        f64::from(self.packet_size) * 8.0 * 1e6 / self.rate
    }

    /// Long-run offered load in bits per second.
    pub fn offered_load_bps(&self) -> f64 {
        match self.kind {
            TrafficKind::FullBuffer => f64::INFINITY,
            TrafficKind::ParetoOnOff => {
                self.rate * self.on_mean_us / (self.on_mean_us + self.off_mean_us)
            }
        }
    }
}

/// Pareto on/off source. Arrivals are spaced one inter-arrival time apart
/// measured in on-time only: the clock pauses during off periods, so a
/// packet that does not fit before an on period ends arrives that much
/// after the next on period starts.
#[derive(Debug, Clone)]
pub struct ParetoOnOff {
    interval: f64,
    on_mean: f64,
    off_mean: f64,
    shape: f64,
    on_start: f64,
    on_end: f64,
    next: f64,
    rng: RandomStream,
}

impl ParetoOnOff {
    /// First on period starts at time zero.
    pub fn new(spec: &TrafficSpec, mut rng: RandomStream) -> Result<Self, TrafficError> {
        spec.validate()?;
        let on = rng.pareto(spec.on_mean_us, spec.shape)?;
        let mut src = ParetoOnOff {
            interval: spec.inter_arrival_us(),
            on_mean: spec.on_mean_us,
            off_mean: spec.off_mean_us,
            shape: spec.shape,
            on_start: 0.0,
            on_end: on,
            next: spec.inter_arrival_us(),
            rng,
        };
        src.normalize();
        Ok(src)
    }

    fn normalize(&mut self) {
        while self.next > self.on_end {
            let carry = self.next - self.on_end;
            let off = self
                .rng
                .pareto(self.off_mean, self.shape)
                .expect("validated");
            let on = self
                .rng
                .pareto(self.on_mean, self.shape)
                .expect("validated");
            self.on_start = self.on_end + off;
            self.on_end = self.on_start + on;
            self.next = self.on_start + carry;
        }
    }

    /// Time of the next packet, rounded up to a whole µs.
    pub fn next_arrival(&self) -> SimTime {
        SimTime(self.next.ceil() as u64)
    }

    /// The on period containing the next arrival, in µs.
    pub fn current_on_period(&self) -> (f64, f64) {
        (self.on_start, self.on_end)
    }

    /// Consume the pending arrival and return the one after it.
    pub fn advance(&mut self) -> SimTime {
        self.next += self.interval;
        self.normalize();
        self.next_arrival()
    }
}

/// A traffic generator attached to one station.
#[derive(Debug, Clone)]
pub enum TrafficSource {
    FullBuffer {
        packet_size: u32,
    },
    Pareto {
        packet_size: u32,
        gen: Box<ParetoOnOff>,
    },
}

impl TrafficSource {
    pub fn attach(spec: &TrafficSpec, rng: RandomStream) -> Result<Self, TrafficError> {
        spec.validate()?;
        Ok(match spec.kind {
            TrafficKind::FullBuffer => TrafficSource::FullBuffer {
                packet_size: spec.packet_size,
            },
            TrafficKind::ParetoOnOff => TrafficSource::Pareto {
                packet_size: spec.packet_size,
                gen: Box::new(ParetoOnOff::new(spec, rng)?),
            },
        })
    }

    pub fn packet_size(&self) -> u32 {
        match self {
            TrafficSource::FullBuffer { packet_size }
            | TrafficSource::Pareto { packet_size, .. } => *packet_size,
        }
    }

    pub fn is_full_buffer(&self) -> bool {
        matches!(self, TrafficSource::FullBuffer { .. })
    }

    /// None for full-buffer sources, whose refill is tied to dequeues.
    pub fn next_arrival(&self) -> Option<SimTime> {
        match self {
            TrafficSource::FullBuffer { .. } => None,
            TrafficSource::Pareto { gen, .. } => Some(gen.next_arrival()),
        }
    }

    /// Consume the pending arrival; returns the following one.
    pub fn advance(&mut self) -> Option<SimTime> {
        match self {
            TrafficSource::FullBuffer { .. } => None,
            TrafficSource::Pareto { gen, .. } => Some(gen.advance()),
        }
    }
}
