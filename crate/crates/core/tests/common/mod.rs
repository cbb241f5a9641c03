#![allow(dead_code)]

use std::collections::BTreeSet;

use tokendcf::experiments::{ReceiverPlacement, ScenarioConfig};
use tokendcf::network::Protocol;
use tokendcf::sim::StationId;
use tokendcf::traffic::TrafficSpec;

/// Short saturated scenario for property checks.
pub fn small(
    protocol: Protocol,
    n: u32,
    area: f64,
    pkt: u32,
    seed: u64,
    duration_s: f64,
) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.protocol = protocol;
    cfg.n_transmitters = n;
    cfg.area_side = area;
    cfg.duration_s = duration_s;
    cfg.runs = 1;
    cfg.seed = seed;
    cfg.traffic = TrafficSpec::full_buffer(pkt);
    cfg
}

pub fn uniform_receivers(mut cfg: ScenarioConfig) -> ScenarioConfig {
    cfg.receiver_placement = ReceiverPlacement::Uniform;
    cfg
}

/// Adapt written out from the pseudocode with `p` in hundredths and the
/// ratio tests done on integers. Parameters are the defaults: maxNum 20,
/// ratios 0.2 / 0.8, delta 0.1, maxP 0.9.
#[derive(Debug, Clone)]
pub struct AdaptModel {
    pub me: StationId,
    pub p: i64,
    pub success: u32,
    pub fail: u32,
    pub active: BTreeSet<StationId>,
}

impl AdaptModel {
    pub fn new(me: StationId) -> Self {
        AdaptModel {
            me,
            p: 0,
            success: 0,
            fail: 0,
            active: BTreeSet::from([me]),
        }
    }

    pub fn reset(&mut self) {
        *self = AdaptModel::new(self.me);
    }

    pub fn adapt(&mut self, src: StationId) {
        if self.active.contains(&src) {
            self.success += 1;
        } else {
            self.fail += 1;
            self.active.insert(src);
        }
        let total = self.success + self.fail;
        if total >= 20 {
            let high = 100 * self.success >= 80 * total;
            let low = 100 * self.success <= 20 * total;
            if high {
                if self.p <= 90 {
                    self.p = (self.p + 10).min(90);
                }
                self.success = 0;
                self.fail = 0;
            }
            if low {
                if self.p >= 10 {
                    self.p -= 10;
                }
                self.success = 0;
                self.fail = 0;
            }
        }
    }
}

/// Compare the module against the model; returns a description of the
/// first mismatch.
pub fn agree(model: &AdaptModel, st: &tokendcf::mac::token::SchedulerState) -> Result<(), String> {
    let p = model.p as f64 / 100.0;
    let active: Vec<StationId> = st.active().iter().collect();
    let expected: Vec<StationId> = model.active.iter().copied().collect();
    if st.p() != p || st.success() != model.success || st.fail() != model.fail || active != expected
    {
        return Err(format!(
            "module p={} s={} f={} active={:?}; model p={} s={} f={} active={:?}",
            st.p(),
            st.success(),
            st.fail(),
            active,
            p,
            model.success,
            model.fail,
            expected
        ));
    }
    if !(0.0..=0.9).contains(&st.p()) {
        return Err(format!("p out of range: {}", st.p()));
    }
    Ok(())
}
