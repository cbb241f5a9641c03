//! Shared wireless medium with fixed transmission and carrier-sense radii.
//!
//! Interference follows the protocol model: a transmission corrupts every
//! reception at stations within carrier-sense range of its source that
//! overlaps it in time, by any amount. There is no capture effect and no
//! propagation delay.

use thiserror::Error;

use crate::mac::frame::{FrameKind, MacFrame};
use crate::sim::{SimTime, StationId};

pub const DEFAULT_TX_RANGE: f64 = 250.0;
pub const DEFAULT_CS_RANGE: f64 = 550.0;

#[derive(Debug, Error, PartialEq)]
pub enum MediumError {
    #[error("unknown station {0}")]
    UnknownStation(StationId),
    #[error("station {0} is already transmitting")]
    AlreadyTransmitting(StationId),
    #[error("unknown transmission {0:?}")]
    UnknownTransmission(TxId),
    #[error("transmission {id:?} ends at {end}, finalized at {now}")]
    NotFinished {
        id: TxId,
        end: SimTime,
        now: SimTime,
    },
    #[error("invalid ranges: tx {tx} m, carrier sense {cs} m")]
    InvalidRanges { tx: f64, cs: f64 },
    #[error("station {id} at ({x}, {y}) lies outside the {side} m square")]
    OutOfArea {
        id: StationId,
        x: f64,
        y: f64,
        side: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Position {
    pub x: f64,
    pub y: f64,
}

impl Position {
    pub fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance: f64,
    pub in_tx_range: bool,
    pub in_cs_range: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Topology {
    positions: Vec<Position>,
    tx_range: f64,
    cs_range: f64,
    area_side: f64,
}

impl Topology {
    pub fn new(
        positions: Vec<Position>,
        tx_range: f64,
        cs_range: f64,
        area_side: f64,
    ) -> Result<Self, MediumError> {
        if !(tx_range > 0.0) || !(cs_range >= tx_range) {
            return Err(MediumError::InvalidRanges {
                tx: tx_range,
                cs: cs_range,
            });
        }
        for (i, p) in positions.iter().enumerate() {
            if !(0.0..=area_side).contains(&p.x) || !(0.0..=area_side).contains(&p.y) {
                return Err(MediumError::OutOfArea {
                    id: i as StationId,
                    x: p.x,
                    y: p.y,
                    side: area_side,
                });
            }
        }
        Ok(Topology {
            positions,
            tx_range,
            cs_range,
            area_side,
        })
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[Position] {
        &self.positions
    }

    pub fn position(&self, id: StationId) -> Result<Position, MediumError> {
        self.positions
            .get(id as usize)
            .copied()
            .ok_or(MediumError::UnknownStation(id))
    }

    pub fn tx_range(&self) -> f64 {
        self.tx_range
    }

    pub fn cs_range(&self) -> f64 {
        self.cs_range
    }

    pub fn area_side(&self) -> f64 {
        self.area_side
    }

    /// Distance and range predicates; both predicates are inclusive.
    pub fn link_geometry(&self, a: StationId, b: StationId) -> Result<LinkGeometry, MediumError> {
        let d = self.position(a)?.distance(&self.position(b)?);
        Ok(LinkGeometry {
            distance: d,
            in_tx_range: d <= self.tx_range,
            in_cs_range: d <= self.cs_range,
        })
    }

    /// True when every pair of stations senses each other.
    pub fn is_clique(&self) -> bool {
        let n = self.len() as StationId;
        (0..n).all(|a| {
            (a + 1..n).all(|b| {
                self.link_geometry(a, b)
                    .map(|g| g.in_cs_range)
                    .unwrap_or(false)
            })
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TxId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Reception {
    Delivered,
    Corrupted,
    NotDecodable,
}

/// A frame currently on the air.
#[derive(Debug, Clone)]
pub struct ActiveTransmission {
    pub src: StationId,
    pub frame: MacFrame,
    pub start: SimTime,
    pub end: SimTime,
    /// Stations within transmission range of `src`.
    receivers: Vec<StationId>,
    /// Latched per entry of `receivers`; never cleared.
    corrupted: Vec<bool>,
}

impl ActiveTransmission {
    pub fn outcome(&self, station: StationId) -> Reception {
        match self.receivers.iter().position(|&r| r == station) {
            Some(i) if self.corrupted[i] => Reception::Corrupted,
            Some(_) => Reception::Delivered,
            None => Reception::NotDecodable,
        }
    }

    /// Outcomes at every station within transmission range of the source.
    pub fn receptions(&self) -> impl Iterator<Item = (StationId, Reception)> + '_ {
        self.receivers.iter().zip(&self.corrupted).map(|(&r, &c)| {
            (
                r,
                if c {
                    Reception::Corrupted
                } else {
                    Reception::Delivered
                },
            )
        })
    }

    /// Outcome for every station `0..n`, with `src` reported as NotDecodable.
    pub fn outcomes(&self, n: usize) -> Vec<Reception> {
        (0..n as StationId).map(|r| self.outcome(r)).collect()
    }
}

/// Transmission as recorded in the medium log. Frames still on the air when
/// the log is taken keep their scheduled `end` and the outcomes so far.
#[derive(Debug, Clone, PartialEq)]
pub struct TxRecord {
    pub src: StationId,
    pub dst: StationId,
    pub kind: FrameKind,
    pub start: SimTime,
    pub end: SimTime,
    pub delivered: Vec<StationId>,
}

impl From<&ActiveTransmission> for TxRecord {
    fn from(tx: &ActiveTransmission) -> Self {
        TxRecord {
            src: tx.src,
            dst: tx.frame.dst,
            kind: tx.frame.kind,
            start: tx.start,
            end: tx.end,
            delivered: tx
                .receptions()
                .filter(|(_, r)| *r == Reception::Delivered)
                .map(|(s, _)| s)
                .collect(),
        }
    }
}

/// Result of ending a transmission.
#[derive(Debug)]
pub struct Finalized {
    pub tx: ActiveTransmission,
    /// Stations whose physical carrier went idle with this frame's end.
    pub became_idle: Vec<StationId>,
}

pub struct Medium {
    topo: Topology,
    n: usize,
    in_cs: Vec<bool>,
    /// Carrier-sense neighbours of each station, itself included.
    cs_nbrs: Vec<Vec<StationId>>,
    /// Stations that can decode each source, itself excluded.
    tx_nbrs: Vec<Vec<StationId>>,
    slots: Vec<Option<ActiveTransmission>>,
    free: Vec<u32>,
    active: Vec<TxId>,
    transmitting: Vec<Option<TxId>>,
    sensed: Vec<u32>,
    busy_since: Vec<SimTime>,
    busy_total: Vec<u64>,
    last_busy_end: Vec<SimTime>,
    // Channel-wide (any transmission anywhere) busy accounting.
    global_active: u32,
    global_busy_since: SimTime,
    global_busy_total: u64,
    log: Option<Vec<TxRecord>>,
}

impl Medium {
    pub fn new(topo: Topology) -> Self {
        let n = topo.len();
        let mut in_cs = vec![false; n * n];
        let mut cs_nbrs = vec![Vec::new(); n];
        let mut tx_nbrs = vec![Vec::new(); n];
        for a in 0..n {
            for b in 0..n {
                let g = topo
                    .link_geometry(a as StationId, b as StationId)
                    .expect("indices in range");
                if g.in_cs_range {
                    in_cs[a * n + b] = true;
                    cs_nbrs[a].push(b as StationId);
                }
                if a != b && g.in_tx_range {
                    tx_nbrs[a].push(b as StationId);
                }
            }
        }
        Medium {
            topo,
            n,
            in_cs,
            cs_nbrs,
            tx_nbrs,
            slots: Vec::new(),
            free: Vec::new(),
            active: Vec::new(),
            transmitting: vec![None; n],
            sensed: vec![0; n],
            busy_since: vec![SimTime::ZERO; n],
            busy_total: vec![0; n],
            last_busy_end: vec![SimTime::ZERO; n],
            global_active: 0,
            global_busy_since: SimTime::ZERO,
            global_busy_total: 0,
            log: None,
        }
    }

    pub fn enable_log(&mut self) {
        self.log = Some(Vec::new());
    }

    /// Finished frames in completion order, then frames still on the air in
    /// start order.
    pub fn take_log(&mut self) -> Option<Vec<TxRecord>> {
        let mut log = self.log.take()?;
        let mut open: Vec<_> = self.active().map(TxRecord::from).collect();
        open.sort_by_key(|r| (r.start, r.src));
        log.extend(open);
        Some(log)
    }

    pub fn topology(&self) -> &Topology {
        &self.topo
    }

    pub fn station_count(&self) -> usize {
        self.n
    }

    pub fn link_geometry(&self, a: StationId, b: StationId) -> Result<LinkGeometry, MediumError> {
        self.topo.link_geometry(a, b)
    }

    #[inline]
    pub fn senses(&self, listener: StationId, src: StationId) -> bool {
        self.in_cs[listener as usize * self.n + src as usize]
    }

    pub fn is_transmitting(&self, station: StationId) -> bool {
        self.transmitting
            .get(station as usize)
            .is_some_and(|t| t.is_some())
    }

    /// Whether the physical carrier at `station` is busy right now.
    pub fn sensed_busy(&self, station: StationId) -> bool {
        self.sensed[station as usize] > 0
    }

    /// Physical carrier sense at instant `at` against the frames on the air.
    pub fn carrier_busy(&self, station: StationId, at: SimTime) -> bool {
        if station as usize >= self.n {
            return false;
        }
        self.active.iter().any(|id| {
            let tx = self.slots[id.0 as usize].as_ref().expect("active slot");
            self.senses(station, tx.src) && tx.start <= at && at < tx.end
        })
    }

    /// Last instant the station's sensed carrier went from busy to idle.
    pub fn last_busy_end(&self, station: StationId) -> SimTime {
        self.last_busy_end[station as usize]
    }

    /// Total time the station has sensed the carrier busy, up to `now`.
    pub fn busy_time(&self, station: StationId, now: SimTime) -> u64 {
        let i = station as usize;
        let open = if self.sensed[i] > 0 {
            (now - self.busy_since[i]).0
        } else {
            0
        };
        self.busy_total[i] + open
    }

    /// Union of all transmission intervals anywhere, up to `now`.
    pub fn channel_busy_time(&self, now: SimTime) -> u64 {
        let open = if self.global_active > 0 {
            (now - self.global_busy_since).0
        } else {
            0
        };
        self.global_busy_total + open
    }

    pub fn active(&self) -> impl Iterator<Item = &ActiveTransmission> {
        self.active
            .iter()
            .map(|id| self.slots[id.0 as usize].as_ref().expect("active slot"))
    }

    pub fn get(&self, id: TxId) -> Option<&ActiveTransmission> {
        self.slots.get(id.0 as usize).and_then(|s| s.as_ref())
    }

    /// Put a frame on the air for `airtime`. Returns its id and the stations
    /// whose carrier went from idle to busy.
    pub fn begin_transmission(
        &mut self,
        src: StationId,
        frame: MacFrame,
        now: SimTime,
        airtime: SimTime,
    ) -> Result<(TxId, Vec<StationId>), MediumError> {
        let s = src as usize;
        if s >= self.n {
            return Err(MediumError::UnknownStation(src));
        }
        if self.transmitting[s].is_some() {
            return Err(MediumError::AlreadyTransmitting(src));
        }
        assert!(airtime.0 > 0, "zero-length transmission");

        let receivers = self.tx_nbrs[s].clone();
        let mut corrupted = vec![false; receivers.len()];
        for id in &self.active {
            let other = self.slots[id.0 as usize].as_mut().expect("active slot");
            // Frames finishing at this very instant do not overlap.
            if other.end <= now {
                continue;
            }
            let a = other.src as usize;
            for (i, &r) in other.receivers.iter().enumerate() {
                if self.in_cs[r as usize * self.n + s] {
                    other.corrupted[i] = true;
                }
            }
            for (i, &r) in receivers.iter().enumerate() {
                if self.in_cs[r as usize * self.n + a] {
                    corrupted[i] = true;
                }
            }
        }

        let tx = ActiveTransmission {
            src,
            frame,
            start: now,
            end: now + airtime,
            receivers,
            corrupted,
        };
        let id = match self.free.pop() {
            Some(slot) => {
                self.slots[slot as usize] = Some(tx);
                TxId(slot)
            }
            None => {
                self.slots.push(Some(tx));
                TxId(self.slots.len() as u32 - 1)
            }
        };
        self.active.push(id);
        self.transmitting[s] = Some(id);

        if self.global_active == 0 {
            self.global_busy_since = now;
        }
        self.global_active += 1;

        let mut became_busy = Vec::new();
        for &r in &self.cs_nbrs[s] {
            let i = r as usize;
            self.sensed[i] += 1;
            if self.sensed[i] == 1 {
                self.busy_since[i] = now;
                became_busy.push(r);
            }
        }
        Ok((id, became_busy))
    }

    /// Take a frame off the air at its end time.
    pub fn finalize_transmission(
        &mut self,
        id: TxId,
        now: SimTime,
    ) -> Result<Finalized, MediumError> {
        let end = match self.get(id) {
            Some(tx) => tx.end,
            None => return Err(MediumError::UnknownTransmission(id)),
        };
        if end != now {
            return Err(MediumError::NotFinished { id, end, now });
        }
        let tx = self.slots[id.0 as usize].take().expect("checked");
        self.free.push(id.0);
        self.active.retain(|&a| a != id);
        self.transmitting[tx.src as usize] = None;

        self.global_active -= 1;
        if self.global_active == 0 {
            self.global_busy_total += (now - self.global_busy_since).0;
        }

        let mut became_idle = Vec::new();
        for &r in &self.cs_nbrs[tx.src as usize] {
            let i = r as usize;
            self.sensed[i] -= 1;
            if self.sensed[i] == 0 {
                self.busy_total[i] += (now - self.busy_since[i]).0;
                self.last_busy_end[i] = now;
                became_idle.push(r);
            }
        }

        if let Some(log) = self.log.as_mut() {
            log.push(TxRecord::from(&tx));
        }
        Ok(Finalized { tx, became_idle })
    }
}
