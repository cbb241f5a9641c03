//! Stations, medium and traffic wired into one event loop.

use std::collections::VecDeque;

use thiserror::Error;

use crate::mac::dcf::{Access, Station, StationCounters};
use crate::mac::frame::{FrameKind, MacParams};
use crate::mac::token::{Policy, SchedulerState, TokenParams};
use crate::medium::{Medium, MediumError, Reception, Topology, TxId, TxRecord};
use crate::metrics::MetricsRecord;
use crate::sim::{
    Event, EventTag, RandomStream, Scheduler, SimTime, StationId, StreamId, StreamPurpose, Target,
    TraceRecord,
};
use crate::traffic::{TrafficError, TrafficSource, TrafficSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Protocol {
    #[default]
    Dcf,
    TokenDcf,
}

impl Protocol {
    pub fn as_str(self) -> &'static str {
        match self {
            Protocol::Dcf => "dcf",
            Protocol::TokenDcf => "token_dcf",
        }
    }

    pub const ALL: [Protocol; 2] = [Protocol::Dcf, Protocol::TokenDcf];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Action {
    AccessTimer,
    AckTimeout,
    SendAck { to: StationId, seq: u64 },
    NavExpire,
    TxEnd(TxId),
    PeriodReset,
    Arrival,
}

impl EventTag for Action {
    fn tag(&self) -> &'static str {
        match self {
            Action::AccessTimer => "access_timer",
            Action::AckTimeout => "ack_timeout",
            Action::SendAck { .. } => "send_ack",
            Action::NavExpire => "nav_expire",
            Action::TxEnd(_) => "tx_end",
            Action::PeriodReset => "period_reset",
            Action::Arrival => "arrival",
        }
    }
}

/// A single-hop flow from a transmitter to its receiver.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Flow {
    pub src: StationId,
    pub dst: StationId,
}

#[derive(Debug, Clone)]
pub struct NetworkConfig {
    pub protocol: Protocol,
    pub policy: Policy,
    pub mac: MacParams,
    pub token: TokenParams,
    pub traffic: TrafficSpec,
    pub seed: u64,
    pub run: u32,
}

/// Runtime self-checks collected while the simulation runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Diagnostics {
    /// Delivered data frames in a clique after which flags were scanned.
    pub exclusivity_checks: u64,
    /// Scans that found more than one station holding a privilege.
    pub exclusivity_violations: u64,
    /// Privileged accesses that directly followed an ACK in a clique.
    pub sifs_gap_checks: u64,
    /// ...of which the idle gap was not exactly SIFS.
    pub sifs_gap_violations: u64,
    pub acks_ignored: u64,
}

#[derive(Debug, Error)]
pub enum NetworkError {
    #[error(transparent)]
    Medium(#[from] MediumError),
    #[error(transparent)]
    Traffic(#[from] TrafficError),
    #[error("flow {src} -> {dst} references a station outside the topology")]
    BadFlow { src: StationId, dst: StationId },
}

pub struct Network {
    pub(crate) protocol: Protocol,
    pub(crate) params: MacParams,
    pub(crate) token_header: bool,
    pub(crate) medium: Medium,
    pub(crate) stations: Vec<Station>,
    pub(crate) metrics: MetricsRecord,
    pub(crate) diag: Diagnostics,
    pub(crate) clique: bool,
    pub(crate) last_frame_end: Option<(SimTime, FrameKind)>,
    traffic_spec: TrafficSpec,
    flows: Vec<Flow>,
    period: SimTime,
}

impl Network {
    pub fn new(cfg: &NetworkConfig, topo: Topology, flows: &[Flow]) -> Result<Self, NetworkError> {
        cfg.traffic.validate()?;
        let n = topo.len();
        for f in flows {
            if f.src as usize >= n || f.dst as usize >= n {
                return Err(NetworkError::BadFlow {
                    src: f.src,
                    dst: f.dst,
                });
            }
        }
        let clique = topo.is_clique();
        let stream = |station, purpose| {
            RandomStream::new(
                cfg.seed,
                StreamId {
                    run: cfg.run,
                    station,
                    purpose,
                },
            )
        };
        let mut stations = Vec::with_capacity(n);
        for id in 0..n as StationId {
            let flow = flows.iter().find(|f| f.src == id);
            let traffic = match flow {
                Some(_) => Some(TrafficSource::attach(
                    &cfg.traffic,
                    stream(id, StreamPurpose::Traffic),
                )?),
                None => None,
            };
            let token = (cfg.protocol == Protocol::TokenDcf)
                .then(|| SchedulerState::new(id, cfg.token.clone(), cfg.policy));
            stations.push(Station {
                id,
                dst: flow.map(|f| f.dst),
                queue: VecDeque::with_capacity(cfg.mac.queue_capacity),
                cw: cfg.mac.cw_min,
                retries: 0,
                backoff: None,
                access: Access::Idle,
                nav_until: SimTime::ZERO,
                nav_timer: None,
                ack_tx: None,
                token,
                backoff_rng: stream(id, StreamPurpose::Backoff),
                priv_rng: stream(id, StreamPurpose::Privilege),
                traffic,
                next_seq: 0,
                counters: StationCounters::default(),
            });
        }
        let data_airtime = cfg.mac.airtime(
            &crate::mac::frame::MacFrame::data(0, 0, cfg.traffic.packet_size, 0),
            cfg.protocol == Protocol::TokenDcf,
        );
        let metrics = MetricsRecord {
            success_cycle_us: (cfg.mac.difs + data_airtime + cfg.mac.sifs + cfg.mac.ack_airtime())
                .0,
            ..Default::default()
        };
        Ok(Network {
            protocol: cfg.protocol,
            params: cfg.mac.clone(),
            token_header: cfg.protocol == Protocol::TokenDcf,
            medium: Medium::new(topo),
            stations,
            metrics,
            diag: Diagnostics::default(),
            clique,
            last_frame_end: None,
            traffic_spec: cfg.traffic.clone(),
            flows: flows.to_vec(),
            period: cfg.token.period,
        })
    }

    pub fn protocol(&self) -> Protocol {
        self.protocol
    }

    pub fn params(&self) -> &MacParams {
        &self.params
    }

    pub fn medium(&self) -> &Medium {
        &self.medium
    }

    pub fn medium_mut(&mut self) -> &mut Medium {
        &mut self.medium
    }

    pub fn stations(&self) -> &[Station] {
        &self.stations
    }

    pub fn station(&self, id: StationId) -> &Station {
        &self.stations[id as usize]
    }

    pub fn flows(&self) -> &[Flow] {
        &self.flows
    }

    pub fn traffic_spec(&self) -> &TrafficSpec {
        &self.traffic_spec
    }

    pub fn diagnostics(&self) -> Diagnostics {
        self.diag
    }

    pub fn metrics(&self) -> &MetricsRecord {
        &self.metrics
    }

    pub fn is_clique(&self) -> bool {
        self.clique
    }

    /// Fill queues, schedule the first arrivals and period resets, and
    /// start contention at every backlogged station.
    pub fn start(&mut self, s: &mut Scheduler<Action>) {
        let now = s.now();
        for id in 0..self.stations.len() as StationId {
            self.refill(now, id);
            if let Some(at) = self.stations[id as usize]
                .traffic
                .as_ref()
                .and_then(|t| t.next_arrival())
            {
                s.schedule_at(at, Target::Station(id), Action::Arrival);
            }
            if self.stations[id as usize].token.is_some() {
                s.schedule(self.period, Target::Station(id), Action::PeriodReset);
            }
        }
        for id in 0..self.stations.len() as StationId {
            if !self.stations[id as usize].queue.is_empty() {
                self.try_access(s, id);
            }
        }
    }

    pub fn handle(&mut self, s: &mut Scheduler<Action>, ev: Event<Action>) {
        match (ev.target, ev.payload) {
            (Target::Medium, Action::TxEnd(tx)) => self.on_tx_end(s, tx),
            (Target::Station(id), Action::AccessTimer) => self.backoff_expired(s, id),
            (Target::Station(id), Action::AckTimeout) => self.ack_timeout(s, id),
            (Target::Station(id), Action::SendAck { to, seq }) => self.send_ack(s, id, to, seq),
            (Target::Station(id), Action::NavExpire) => {
                self.stations[id as usize].nav_timer = None;
                self.medium_state_changed(s, id, false);
            }
            (Target::Station(id), Action::PeriodReset) => self.period_reset(s, id),
            (Target::Station(id), Action::Arrival) => self.on_arrival(s, id),
            (target, payload) => panic!("misaddressed event {payload:?} for {target:?}"),
        }
    }

    /// Run the event loop to `horizon`.
    pub fn run(&mut self, s: &mut Scheduler<Action>, horizon: SimTime) -> u64 {
        s.run_until(horizon, |s, ev| self.handle(s, ev))
    }

    /// Close the books at `now` and return the raw metrics.
    pub fn finish(&mut self, now: SimTime) -> MetricsRecord {
        let mut rec = self.metrics.clone();
        rec.horizon = now.0;
        rec.busy_time = self.medium.channel_busy_time(now);
        rec
    }

    pub fn period_reset(&mut self, s: &mut Scheduler<Action>, id: StationId) {
        if let Some(tok) = self.stations[id as usize].scheduler_mut() {
            tok.period_reset();
            s.schedule(self.period, Target::Station(id), Action::PeriodReset);
        }
    }

    fn on_arrival(&mut self, s: &mut Scheduler<Action>, id: StationId) {
        let now = s.now();
        let Some(size) = self.stations[id as usize]
            .traffic
            .as_ref()
            .map(|t| t.packet_size())
        else {
            return;
        };
        loop {
            self.enqueue_packet(s, id, size);
            let next = self.stations[id as usize]
                .traffic
                .as_mut()
                .and_then(|t| t.advance())
                .expect("arrival events only for scheduled sources");
            if next > now {
                s.schedule_at(next, Target::Station(id), Action::Arrival);
                break;
            }
        }
    }

    fn on_tx_end(&mut self, s: &mut Scheduler<Action>, tx: TxId) {
        let now = s.now();
        let fin = self
            .medium
            .finalize_transmission(tx, now)
            .expect("transmission ends exactly at its scheduled time");
        let frame = fin.tx.frame.clone();
        let src = frame.src;
        match frame.kind {
            FrameKind::Data => {
                let timer = s.schedule(
                    self.params.ack_timeout(),
                    Target::Station(src),
                    Action::AckTimeout,
                );
                self.stations[src as usize].access = Access::AwaitAck(timer);
            }
            FrameKind::Ack => self.stations[src as usize].ack_tx = None,
        }
        self.last_frame_end = Some((now, frame.kind));

        let mut delivered = false;
        for (r, outcome) in fin.tx.receptions() {
            if outcome == Reception::Delivered {
                delivered = true;
                self.handle_frame(s, r, &frame);
            }
        }
        if frame.is_data() && delivered && self.clique && self.protocol == Protocol::TokenDcf {
            self.diag.exclusivity_checks += 1;
            let holders = self.stations.iter().filter(|st| st.flag()).count();
            if holders > 1 {
                self.diag.exclusivity_violations += 1;
            }
        }
        for r in fin.became_idle {
            self.medium_state_changed(s, r, false);
        }
    }

    /// Per-station packet accounting: (arrivals, acked, dropped at the
    /// buffer, dropped after retries, still queued).
    pub fn conservation(&self) -> Vec<(StationCounters, usize)> {
        self.stations
            .iter()
            .map(|st| (st.counters, st.queue.len()))
            .collect()
    }
}

/// Everything one simulation run produces.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub record: MetricsRecord,
    pub diagnostics: Diagnostics,
    pub conservation: Vec<(StationCounters, usize)>,
    pub events_fired: u64,
    pub trace: Option<Vec<TraceRecord>>,
    pub tx_log: Option<Vec<TxRecord>>,
    pub final_p: Vec<Option<f64>>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct RunOptions {
    pub trace_events: bool,
    pub log_transmissions: bool,
}

/// Build a network, run it to `horizon` and collect the results.
pub fn simulate(
    cfg: &NetworkConfig,
    topo: Topology,
    flows: &[Flow],
    horizon: SimTime,
    opts: RunOptions,
) -> Result<RunOutput, NetworkError> {
    let mut net = Network::new(cfg, topo, flows)?;
    let mut sched = Scheduler::new();
    if opts.trace_events {
        sched.enable_trace();
    }
    if opts.log_transmissions {
        net.medium_mut().enable_log();
    }
    net.start(&mut sched);
    net.run(&mut sched, horizon);
    let record = net.finish(horizon);
    Ok(RunOutput {
        record,
        diagnostics: net.diag,
        conservation: net.conservation(),
        events_fired: sched.fired(),
        trace: sched.take_trace(),
        tx_log: net.medium.take_log(),
        final_p: net
            .stations
            .iter()
            .map(|st| st.scheduler().map(|t| t.p()))
            .collect(),
    })
}
