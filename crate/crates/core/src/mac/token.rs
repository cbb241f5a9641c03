//! Token-DCF privilege scheduling.
//!
//! Every data frame can name one neighbour as the privileged station for
//! the next transmission. The privileged station skips contention and
//! transmits SIFS after the channel goes idle. Whether a grant is made at
//! all is a coin flip with probability `p`, which each station adapts from
//! how predictable the set of transmitters it hears has been.

use std::collections::BTreeMap;

use crate::sim::{RandomStream, SimTime, StationId};

use super::frame::MacFrame;

/// Fixed-point resolution for `p`: one unit is 1e-9.
const P_UNIT: f64 = 1e9;

/// How the privileged station is picked among the active set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Policy {
    /// Longest queue first.
    #[default]
    Lqf,
    /// Largest queue length times link capacity (single-hop backpressure).
    Backpressure,
}

impl Policy {
    pub fn as_str(self) -> &'static str {
        match self {
            Policy::Lqf => "lqf",
            Policy::Backpressure => "backpressure",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TokenParams {
    pub min_ratio: f64,
    pub max_ratio: f64,
    pub max_num: u32,
    pub delta: f64,
    pub max_p: f64,
    pub period: SimTime,
}

impl Default for TokenParams {
    fn default() -> Self {
        TokenParams {
            min_ratio: 0.2,
            max_ratio: 0.8,
            max_num: 20,
            delta: 0.1,
            max_p: 0.9,
            period: SimTime(100_000),
        }
    }
}

impl TokenParams {
    /// Returns the name of the first offending field and why.
    pub fn validate(&self) -> Result<(), (&'static str, String)> {
        if !(0.0 <= self.min_ratio && self.min_ratio < self.max_ratio) {
            return Err((
                "min_ratio",
                format!("need 0 <= min_ratio < max_ratio, got {}", self.min_ratio),
            ));
        }
        if self.max_ratio > 1.0 {
            return Err(("max_ratio", format!("must be <= 1, got {}", self.max_ratio)));
        }
        if !(self.delta > 0.0 && self.delta <= self.max_p) {
            return Err((
                "delta",
                format!("need 0 < delta <= max_p, got {}", self.delta),
            ));
        }
        if !(self.max_p < 1.0) {
            return Err(("max_p", format!("must be < 1, got {}", self.max_p)));
        }
        if self.max_num < 1 {
            return Err(("max_num", "must be >= 1".into()));
        }
        if self.period.0 == 0 {
            return Err(("period", "must be positive".into()));
        }
        Ok(())
    }
}

/// How a station waits before its next access attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AccessPlan {
    /// Privileged: transmit once the channel has been idle for SIFS.
    Sifs,
    /// Regular contention: DIFS followed by this many idle slots.
    DifsPlusSlots(u32),
}

/// Choose the access plan for a station starting or resuming its timer.
///
/// `pending_slots` is a frozen backoff count carried over from an
/// interrupted countdown; without one a fresh count is drawn from `[0, cw]`.
pub fn backoff_duration(
    flag: bool,
    head_is_data: bool,
    pending_slots: Option<u32>,
    cw: u32,
    rng: &mut RandomStream,
) -> AccessPlan {
    if flag && head_is_data {
        return AccessPlan::Sifs;
    }
    let b = match pending_slots {
        Some(b) => b,
        None => rng.uniform_int(0, i64::from(cw)).expect("cw >= 0") as u32,
    };
    AccessPlan::DifsPlusSlots(b)
}

/// Set of stations heard in the current period, kept sorted.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ActiveSet(Vec<StationId>);

impl ActiveSet {
    pub fn only(id: StationId) -> Self {
        ActiveSet(vec![id])
    }

    pub fn contains(&self, id: StationId) -> bool {
        self.0.binary_search(&id).is_ok()
    }

    /// Returns false if already present.
    pub fn insert(&mut self, id: StationId) -> bool {
        match self.0.binary_search(&id) {
            Ok(_) => false,
            Err(pos) => {
                self.0.insert(pos, id);
                true
            }
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = StationId> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// Per-station Token-DCF state.
#[derive(Debug, Clone)]
pub struct SchedulerState {
    my_id: StationId,
    params: TokenParams,
    policy: Policy,
    p_units: i64,
    delta_units: i64,
    max_p_units: i64,
    active: ActiveSet,
    success: u32,
    fail: u32,
    flag: bool,
    q_len: BTreeMap<StationId, u32>,
}

impl SchedulerState {
    pub fn new(my_id: StationId, params: TokenParams, policy: Policy) -> Self {
        let delta_units = (params.delta * P_UNIT).round() as i64;
        let max_p_units = (params.max_p * P_UNIT).round() as i64;
        SchedulerState {
            my_id,
            params,
            policy,
            p_units: 0,
            delta_units,
            max_p_units,
            active: ActiveSet::only(my_id),
            success: 0,
            fail: 0,
            flag: false,
            q_len: BTreeMap::new(),
        }
    }

    pub fn my_id(&self) -> StationId {
        self.my_id
    }

    pub fn params(&self) -> &TokenParams {
        &self.params
    }

    pub fn policy(&self) -> Policy {
        self.policy
    }

    pub fn p(&self) -> f64 {
        self.p_units as f64 / P_UNIT
    }

    pub fn active(&self) -> &ActiveSet {
        &self.active
    }

    pub fn success(&self) -> u32 {
        self.success
    }

    pub fn fail(&self) -> u32 {
        self.fail
    }

    pub fn flag(&self) -> bool {
        self.flag
    }

    pub fn set_flag(&mut self, flag: bool) {
        self.flag = flag;
    }

    pub fn q_len_of(&self, id: StationId) -> Option<u32> {
        self.q_len.get(&id).copied()
    }

    #[cfg(test)]
    pub(crate) fn force_p(&mut self, p: f64) {
        self.p_units = (p * P_UNIT).round() as i64;
    }

    /// Periodic reinitialisation. The flag and the overheard queue
    /// lengths survive; everything the controller learned does not.
    pub fn period_reset(&mut self) {
        self.p_units = 0;
        self.active = ActiveSet::only(self.my_id);
        self.success = 0;
        self.fail = 0;
    }

    /// Update the success/fail counters for a frame from `src` and move
    /// `p` when enough frames have been seen.
    pub fn adapt(&mut self, src: StationId) {
        if self.active.insert(src) {
            self.fail += 1;
        } else {
            self.success += 1;
        }
        let total = self.success + self.fail;
        if total < self.params.max_num {
            return;
        }
        let ratio = f64::from(self.success) / f64::from(total);
        if ratio >= self.params.max_ratio {
            if self.p_units <= self.max_p_units {
                self.p_units = (self.p_units + self.delta_units).min(self.max_p_units);
            }
            self.success = 0;
            self.fail = 0;
        }
        if ratio <= self.params.min_ratio {
            if self.p_units >= self.delta_units {
                self.p_units -= self.delta_units;
            }
            self.success = 0;
            self.fail = 0;
        }
    }

    /// Argmax over the active set, ignoring `p`. Ties go to the lowest id.
    pub fn best_candidate(
        &self,
        own_queue_len: u32,
        capacity: impl Fn(StationId) -> u64,
    ) -> Option<StationId> {
        let mut best: Option<(u128, StationId)> = None;
        for id in self.active.iter() {
            let q = if id == self.my_id {
                own_queue_len
            } else {
                self.q_len.get(&id).copied().unwrap_or(0)
            };
            let weight = match self.policy {
                Policy::Lqf => u128::from(q),
                Policy::Backpressure => u128::from(q) * u128::from(capacity(id)),
            };
            if best.is_none_or(|(w, _)| weight > w) {
                best = Some((weight, id));
            }
        }
        best.map(|(_, id)| id)
    }

    /// With probability `p` return the best candidate, otherwise nobody.
    /// No randomness is consumed while `p` is zero.
    pub fn select_privileged(
        &self,
        own_queue_len: u32,
        capacity: impl Fn(StationId) -> u64,
        rng: &mut RandomStream,
    ) -> Option<StationId> {
        if self.p_units <= 0 || !rng.bernoulli(self.p()) {
            return None;
        }
        self.best_candidate(own_queue_len, capacity)
    }

    /// Fill in the scheduling header of an outgoing frame. Data frames may
    /// carry a grant; the station claims its own grant through `flag`.
    pub fn on_transmit(
        &mut self,
        frame: &mut MacFrame,
        own_queue_len: u32,
        capacity: impl Fn(StationId) -> u64,
        rng: &mut RandomStream,
    ) {
        if !frame.is_data() {
            frame.privileged = None;
            return;
        }
        let privileged = self.select_privileged(own_queue_len, capacity, rng);
        frame.privileged = privileged;
        frame.q_len = own_queue_len;
        self.flag = privileged == Some(self.my_id);
        self.adapt(self.my_id);
    }

    /// Process a data frame decoded at this station, addressed to it or not.
    pub fn on_receive_or_overhear(&mut self, frame: &MacFrame) {
        if !frame.is_data() {
            return;
        }
        self.flag = frame.privileged == Some(self.my_id);
        self.adapt(frame.src);
        self.q_len.insert(frame.src, frame.q_len);
    }

    /// The access timer fired; a privilege covers one access only.
    pub fn on_timer_expired(&mut self) {
        self.flag = false;
    }
}
