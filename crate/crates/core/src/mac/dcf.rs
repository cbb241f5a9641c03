//! IEEE 802.11 DCF channel access, with the Token-DCF hooks applied where
//! a station carries scheduler state.
//!
//! Backoff countdown is not stepped slot by slot. A station that starts
//! counting at `origin` (DIFS after the channel went idle) with `b` slots
//! schedules a single timer at `origin + b * slot`; when the channel turns
//! busy first, the number of whole slots that elapsed is subtracted and the
//! remainder is frozen until the next idle period.

use std::collections::VecDeque;

use crate::medium::TxId;
use crate::metrics::MetricEvent;
use crate::network::{Action, Network};
use crate::sim::{EventId, RandomStream, Scheduler, SimTime, StationId, Target};
use crate::traffic::TrafficSource;

use super::frame::{FrameKind, MacFrame};
use super::token::{backoff_duration, AccessPlan, SchedulerState};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub seq: u64,
    pub arrival: SimTime,
    pub dst: StationId,
    pub payload_bytes: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EnqueueResult {
    Accepted,
    Dropped,
}

/// Externally visible MAC phase of a station.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Phase {
    Idle,
    WaitDifs,
    CountingDown,
    Frozen,
    WaitSifs,
    Transmitting,
    AwaitAck,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Access {
    Idle,
    Frozen,
    Counting {
        timer: EventId,
        origin: SimTime,
        fire_at: SimTime,
        slots: u32,
    },
    Sifs {
        timer: EventId,
        fire_at: SimTime,
    },
    Transmitting(TxId),
    AwaitAck(EventId),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct StationCounters {
    /// Packets offered to the queue, accepted or not.
    pub arrivals: u64,
    pub acked: u64,
    pub dropped_buffer: u64,
    pub dropped_retry: u64,
}

pub struct Station {
    pub(crate) id: StationId,
    pub(crate) dst: Option<StationId>,
    pub(crate) queue: VecDeque<Packet>,
    pub(crate) cw: u32,
    pub(crate) retries: u32,
    /// Remaining backoff slots carried across freezes; None means a fresh
    /// draw is due.
    pub(crate) backoff: Option<u32>,
    pub(crate) access: Access,
    pub(crate) nav_until: SimTime,
    pub(crate) nav_timer: Option<(EventId, SimTime)>,
    pub(crate) ack_tx: Option<TxId>,
    pub(crate) token: Option<SchedulerState>,
    pub(crate) backoff_rng: RandomStream,
    pub(crate) priv_rng: RandomStream,
    pub(crate) traffic: Option<TrafficSource>,
    pub(crate) next_seq: u64,
    pub(crate) counters: StationCounters,
}

impl Station {
    pub fn id(&self) -> StationId {
        self.id
    }

    pub fn queue_len(&self) -> usize {
        self.queue.len()
    }

    pub fn cw(&self) -> u32 {
        self.cw
    }

    pub fn retries(&self) -> u32 {
        self.retries
    }

    pub fn backoff_slots(&self) -> Option<u32> {
        self.backoff
    }

    pub fn counters(&self) -> StationCounters {
        self.counters
    }

    pub fn scheduler(&self) -> Option<&SchedulerState> {
        self.token.as_ref()
    }

    pub(crate) fn scheduler_mut(&mut self) -> Option<&mut SchedulerState> {
        self.token.as_mut()
    }

    pub fn flag(&self) -> bool {
        self.token.as_ref().is_some_and(|t| t.flag())
    }

    pub fn phase(&self, now: SimTime) -> Phase {
        match self.access {
            Access::Idle => Phase::Idle,
            Access::Frozen => Phase::Frozen,
            Access::Counting { origin, .. } if now < origin => Phase::WaitDifs,
            Access::Counting { .. } => Phase::CountingDown,
            Access::Sifs { .. } => Phase::WaitSifs,
            Access::Transmitting(_) => Phase::Transmitting,
            Access::AwaitAck(_) => Phase::AwaitAck,
        }
    }

    fn push_packet(&mut self, now: SimTime, payload_bytes: u32, capacity: usize) -> EnqueueResult {
        self.counters.arrivals += 1;
        if self.queue.len() >= capacity {
            self.counters.dropped_buffer += 1;
            return EnqueueResult::Dropped;
        }
        let seq = self.next_seq;
        self.next_seq += 1;
        self.queue.push_back(Packet {
            seq,
            arrival: now,
            dst: self.dst.unwrap_or(self.id),
            payload_bytes,
        });
        EnqueueResult::Accepted
    }
}

/// Contention window after one more failure.
pub fn doubled_cw(cw: u32, cw_max: u32) -> u32 {
    cw.saturating_mul(2).min(cw_max)
}

impl Network {
    /// Offer a packet of `payload_bytes` to the station's queue.
    pub fn enqueue_packet(
        &mut self,
        s: &mut Scheduler<Action>,
        id: StationId,
        payload_bytes: u32,
    ) -> EnqueueResult {
        let now = s.now();
        let cap = self.params.queue_capacity;
        let st = &mut self.stations[id as usize];
        let res = st.push_packet(now, payload_bytes, cap);
        self.metrics.record(MetricEvent::Enqueued {
            accepted: res == EnqueueResult::Accepted,
        });
        if res == EnqueueResult::Accepted && st.access == Access::Idle {
            self.try_access(s, id);
        }
        res
    }

    /// Top a full-buffer source back up to capacity.
    pub(crate) fn refill(&mut self, now: SimTime, id: StationId) {
        let cap = self.params.queue_capacity;
        let st = &mut self.stations[id as usize];
        let Some(TrafficSource::FullBuffer { packet_size }) = st.traffic else {
            return;
        };
        while st.queue.len() < cap {
            st.push_packet(now, packet_size, cap);
            self.metrics
                .record(MetricEvent::Enqueued { accepted: true });
        }
    }

    pub(crate) fn channel_idle(&self, id: StationId, now: SimTime) -> bool {
        !self.medium.sensed_busy(id) && now >= self.stations[id as usize].nav_until
    }

    /// Start (or restart) the wait before the next access attempt.
    pub(crate) fn try_access(&mut self, s: &mut Scheduler<Action>, id: StationId) {
        let now = s.now();
        let idle = self.channel_idle(id, now);
        let p = &self.params;
        let st = &mut self.stations[id as usize];
        debug_assert!(matches!(st.access, Access::Idle | Access::Frozen));
        if st.queue.is_empty() {
            st.access = Access::Idle;
            return;
        }
        let flag = st.flag();
        if !flag && st.backoff.is_none() {
            st.backoff = Some(
                st.backoff_rng
                    .uniform_int(0, i64::from(st.cw))
                    .expect("cw >= 0") as u32,
            );
        }
        if !idle {
            st.access = Access::Frozen;
            self.arm_nav_timer(s, id);
            return;
        }
        match backoff_duration(flag, true, st.backoff, st.cw, &mut st.backoff_rng) {
            AccessPlan::Sifs => {
                let fire_at = now + p.sifs;
                let timer = s.schedule_at(fire_at, Target::Station(id), Action::AccessTimer);
                st.access = Access::Sifs { timer, fire_at };
            }
            AccessPlan::DifsPlusSlots(b) => {
                st.backoff = Some(b);
                let origin = now + p.difs;
                let fire_at = origin + SimTime(u64::from(b) * p.slot.0);
                let timer = s.schedule_at(fire_at, Target::Station(id), Action::AccessTimer);
                st.access = Access::Counting {
                    timer,
                    origin,
                    fire_at,
                    slots: b,
                };
            }
        }
    }

    pub(crate) fn arm_nav_timer(&mut self, s: &mut Scheduler<Action>, id: StationId) {
        let now = s.now();
        let st = &mut self.stations[id as usize];
        if st.nav_until <= now || self.medium.sensed_busy(id) {
            return;
        }
        match st.nav_timer {
            Some((_, at)) if at >= st.nav_until => {}
            Some((ev, _)) => {
                s.cancel(ev);
                let ev = s.schedule_at(st.nav_until, Target::Station(id), Action::NavExpire);
                st.nav_timer = Some((ev, st.nav_until));
            }
            None => {
                let ev = s.schedule_at(st.nav_until, Target::Station(id), Action::NavExpire);
                st.nav_timer = Some((ev, st.nav_until));
            }
        }
    }

    /// Carrier edge at a station. Busy freezes any wait in progress and
    /// keeps the whole slots still owed; idle resumes a frozen station with
    /// a fresh DIFS (or SIFS when privileged).
    pub fn medium_state_changed(&mut self, s: &mut Scheduler<Action>, id: StationId, busy: bool) {
        let now = s.now();
        let slot = self.params.slot.0;
        let st = &mut self.stations[id as usize];
        if busy {
            match st.access {
                // A timer due this very instant wins: both stations transmit.
                Access::Counting { fire_at, .. } | Access::Sifs { fire_at, .. }
                    if fire_at == now => {}
                Access::Counting {
                    timer,
                    origin,
                    slots,
                    ..
                } => {
                    s.cancel(timer);
                    let elapsed = if now > origin {
                        ((now - origin).0 / slot) as u32
                    } else {
                        0
                    };
                    st.backoff = Some(slots - elapsed);
                    st.access = Access::Frozen;
                }
                Access::Sifs { timer, .. } => {
                    s.cancel(timer);
                    st.access = Access::Frozen;
                }
                _ => {}
            }
        } else if st.access == Access::Frozen {
            if self.channel_idle(id, now) {
                self.try_access(s, id);
            } else {
                self.arm_nav_timer(s, id);
            }
        }
    }

    /// The access timer fired: send the head-of-line data frame.
    pub fn backoff_expired(&mut self, s: &mut Scheduler<Action>, id: StationId) {
        let transmitting = self.medium.is_transmitting(id);
        let st = &mut self.stations[id as usize];
        let privileged = match st.access {
            Access::Sifs { .. } => true,
            Access::Counting { .. } => false,
            _ => return,
        };
        if let Some(tok) = st.scheduler_mut() {
            tok.on_timer_expired();
        }
        if st.queue.is_empty() {
            st.access = Access::Idle;
            st.backoff = None;
            return;
        }
        if transmitting {
            // Our own ACK started at this instant.
            if !privileged {
                st.backoff = Some(0);
            }
            st.access = Access::Frozen;
            return;
        }
        self.transmit_data(s, id, privileged);
    }

    fn transmit_data(&mut self, s: &mut Scheduler<Action>, id: StationId, privileged: bool) {
        let now = s.now();
        // A frame that started at this very instant already ended the gap.
        let idle_gap = (!self.medium.sensed_busy(id)).then(|| now - self.medium.last_busy_end(id));
        let bit_rate = self.params.bit_rate;
        let st = &mut self.stations[id as usize];
        let head = st.queue.front().expect("non-empty queue").clone();
        let mut frame = MacFrame::data(id, head.dst, head.payload_bytes, head.seq);
        let q_len = st.queue.len() as u32;
        if let Some(tok) = st.token.as_mut() {
            tok.on_transmit(&mut frame, q_len, |_| bit_rate, &mut st.priv_rng);
        }
        st.backoff = None;
        let airtime = self.params.airtime(&frame, self.token_header);

        if privileged && self.clique {
            if let Some((end, FrameKind::Ack)) = self.last_frame_end {
                self.diag.sifs_gap_checks += 1;
                if now - end != self.params.sifs {
                    self.diag.sifs_gap_violations += 1;
                }
            }
        }
        self.metrics.record(MetricEvent::TxStart { idle_gap });

        let (tx, became_busy) = self
            .medium
            .begin_transmission(id, frame, now, airtime)
            .expect("station is not already transmitting");
        self.stations[id as usize].access = Access::Transmitting(tx);
        s.schedule(airtime, Target::Medium, Action::TxEnd(tx));
        for r in became_busy {
            self.medium_state_changed(s, r, true);
        }
    }

    /// ACK transmission SIFS after a data frame addressed to `id` ended.
    pub(crate) fn send_ack(
        &mut self,
        s: &mut Scheduler<Action>,
        id: StationId,
        to: StationId,
        seq: u64,
    ) {
        if self.medium.is_transmitting(id) {
            log::debug!("station {id} busy transmitting, ACK to {to} skipped");
            return;
        }
        let frame = MacFrame::ack(id, to, seq);
        let airtime = self.params.ack_airtime();
        let (tx, became_busy) = self
            .medium
            .begin_transmission(id, frame, s.now(), airtime)
            .expect("checked not transmitting");
        self.stations[id as usize].ack_tx = Some(tx);
        s.schedule(airtime, Target::Medium, Action::TxEnd(tx));
        for r in became_busy {
            self.medium_state_changed(s, r, true);
        }
    }

    /// A frame was delivered intact at station `id`.
    pub fn handle_frame(&mut self, s: &mut Scheduler<Action>, id: StationId, frame: &MacFrame) {
        let now = s.now();
        let nav = now + self.params.sifs + self.params.ack_airtime();
        match frame.kind {
            FrameKind::Data => {
                let st = &mut self.stations[id as usize];
                if let Some(tok) = st.token.as_mut() {
                    tok.on_receive_or_overhear(frame);
                }
                if frame.dst == id {
                    s.schedule(
                        self.params.sifs,
                        Target::Station(id),
                        Action::SendAck {
                            to: frame.src,
                            seq: frame.seq,
                        },
                    );
                } else {
                    st.nav_until = st.nav_until.max(nav);
                }
            }
            FrameKind::Ack => {
                if frame.dst != id {
                    return;
                }
                let st = &mut self.stations[id as usize];
                let timer = match st.access {
                    Access::AwaitAck(timer)
                        if st.queue.front().is_some_and(|p| p.seq == frame.seq) =>
                    {
                        timer
                    }
                    _ => {
                        log::debug!("station {id} ignoring unexpected ACK seq {}", frame.seq);
                        self.diag.acks_ignored += 1;
                        return;
                    }
                };
                s.cancel(timer);
                let pkt = st.queue.pop_front().expect("checked head");
                st.counters.acked += 1;
                st.cw = self.params.cw_min;
                st.retries = 0;
                st.backoff = None;
                st.access = Access::Idle;
                self.metrics.record(MetricEvent::Acked {
                    arrival: pkt.arrival,
                    now,
                    payload_bytes: pkt.payload_bytes,
                });
                self.refill(now, id);
                self.try_access(s, id);
            }
        }
    }

    /// No ACK arrived in time: double the window, retry or give up.
    pub fn ack_timeout(&mut self, s: &mut Scheduler<Action>, id: StationId) {
        let now = s.now();
        let st = &mut self.stations[id as usize];
        if !matches!(st.access, Access::AwaitAck(_)) {
            return;
        }
        self.metrics.record(MetricEvent::AckTimeout);
        // A lost frame also loses any privilege it granted its sender.
        if let Some(tok) = st.token.as_mut() {
            tok.set_flag(false);
        }
        st.retries += 1;
        st.cw = doubled_cw(st.cw, self.params.cw_max);
        if st.retries > self.params.retry_limit {
            st.queue.pop_front();
            st.counters.dropped_retry += 1;
            st.cw = self.params.cw_min;
            st.retries = 0;
            self.metrics.record(MetricEvent::RetryDrop);
            self.refill(now, id);
        }
        let st = &mut self.stations[id as usize];
        st.backoff = None;
        st.access = Access::Idle;
        self.try_access(s, id);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cw_doubles_and_saturates() {
        assert_eq!(doubled_cw(16, 1024), 32);
        assert_eq!(doubled_cw(512, 1024), 1024);
        assert_eq!(doubled_cw(1024, 1024), 1024);
    }
}
