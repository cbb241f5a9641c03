//! Throughput, access delay, idle slots, collision frequency, efficiency.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sim::SimTime;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("horizon must be positive")]
    ZeroHorizon,
}

/// Running count/sum/max of a multiset of durations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Summary {
    pub count: u64,
    pub sum: u64,
    pub max: u64,
}

impl Summary {
    pub fn add(&mut self, v: u64) {
        self.count += 1;
        self.sum += v;
        self.max = self.max.max(v);
    }

    pub fn mean(&self) -> Option<f64> {
        (self.count > 0).then(|| self.sum as f64 / self.count as f64)
    }
}

/// Instrumentation points in the MAC and medium.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MetricEvent {
    Enqueued {
        accepted: bool,
    },
    /// A data frame went on the air. `idle_gap` is the idle time it ended;
    /// None when another frame already started at the same instant.
    TxStart {
        idle_gap: Option<SimTime>,
    },
    /// The ACK for a packet that arrived at `arrival` was received at `now`.
    Acked {
        arrival: SimTime,
        now: SimTime,
        payload_bytes: u32,
    },
    AckTimeout,
    RetryDrop,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricsRecord {
    pub delivered_payload_bits: u64,
    pub delivered_packets: u64,
    pub access_delays: Summary,
    pub tx_attempts: u64,
    pub tx_failures: u64,
    pub idle_gaps: Summary,
    pub busy_time: u64,
    pub horizon: u64,
    pub enqueued: u64,
    pub dropped_buffer: u64,
    pub dropped_retry: u64,
    /// Successful-exchange duration (DIFS + data + SIFS + ACK) used for
    /// the efficiency estimate; zero disables it.
    pub success_cycle_us: u64,
}

impl MetricsRecord {
    pub fn record(&mut self, event: MetricEvent) {
        match event {
            MetricEvent::Enqueued { accepted: true } => self.enqueued += 1,
            MetricEvent::Enqueued { accepted: false } => self.dropped_buffer += 1,
            MetricEvent::TxStart { idle_gap } => {
                self.tx_attempts += 1;
                if let Some(gap) = idle_gap {
                    self.idle_gaps.add(gap.0);
                }
            }
            MetricEvent::Acked {
                arrival,
                now,
                payload_bytes,
            } => {
                self.delivered_packets += 1;
                self.delivered_payload_bits += 8 * u64::from(payload_bytes);
                self.access_delays.add((now - arrival).0);
            }
            MetricEvent::AckTimeout => self.tx_failures += 1,
            MetricEvent::RetryDrop => self.dropped_retry += 1,
        }
    }

    pub fn summarize(&self, slot: SimTime) -> Result<MetricsReport, MetricsError> {
        summarize(self, slot)
    }
}

/// Per-run outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub throughput_bps: f64,
    pub access_delay_us: Option<f64>,
    pub idle_slots: Option<f64>,
    pub collision_freq: Option<f64>,
    pub drops: f64,
    pub efficiency: Option<f64>,
}

pub fn summarize(rec: &MetricsRecord, slot: SimTime) -> Result<MetricsReport, MetricsError> {
    if rec.horizon == 0 {
        return Err(MetricsError::ZeroHorizon);
    }
    let horizon_s = rec.horizon as f64 / 1e6;
    let efficiency = if rec.success_cycle_us > 0 && rec.delivered_packets > 0 {
        let t_tr = rec.success_cycle_us as f64;
        let per_success = rec.horizon as f64 / rec.delivered_packets as f64;
        Some(efficiency(t_tr, (per_success - t_tr).max(0.0)))
    } else {
        None
    };
    Ok(MetricsReport {
        throughput_bps: rec.delivered_payload_bits as f64 / horizon_s,
        access_delay_us: rec.access_delays.mean(),
        idle_slots: rec.idle_gaps.mean().map(|g| g / slot.0 as f64),
        collision_freq: (rec.tx_attempts > 0)
            .then(|| rec.tx_failures as f64 / rec.tx_attempts as f64),
        drops: (rec.dropped_buffer + rec.dropped_retry) as f64,
        efficiency,
    })
}

/// Fraction of channel time spent on useful exchanges, `t_tr / (t_oh + t_tr)`.
pub fn efficiency(t_tr: f64, t_oh: f64) -> f64 {
    debug_assert!(t_tr > 0.0 && t_oh >= 0.0);
    t_tr / (t_oh + t_tr)
}

/// Mean of the present values, or None when none are present.
pub fn mean_present(values: impl IntoIterator<Item = Option<f64>>) -> Option<f64> {
    let (mut sum, mut n) = (0.0, 0u32);
    for v in values.into_iter().flatten() {
        sum += v;
        n += 1;
    }
    (n > 0).then(|| sum / f64::from(n))
}

impl MetricsReport {
    /// Field-wise average of several runs.
    pub fn average(runs: &[MetricsReport]) -> MetricsReport {
        let n = runs.len().max(1) as f64;
        MetricsReport {
            throughput_bps: runs.iter().map(|r| r.throughput_bps).sum::<f64>() / n,
            access_delay_us: mean_present(runs.iter().map(|r| r.access_delay_us)),
            idle_slots: mean_present(runs.iter().map(|r| r.idle_slots)),
            collision_freq: mean_present(runs.iter().map(|r| r.collision_freq)),
            drops: runs.iter().map(|r| r.drops).sum::<f64>() / n,
            efficiency: mean_present(runs.iter().map(|r| r.efficiency)),
        }
    }
}
