//! Scenario description and its `key = value` text format.
//!
//! ```text
//! [experiment]
//! protocol = token_dcf
//! n_transmitters = 20
//!
//! [traffic]
//! packet_size = 1500
//! ```
//!
//! Keys are unique across sections, so a key may also appear before the
//! first section header. `#` and `;` start comments.

use std::collections::HashMap;
use std::str::FromStr;

use thiserror::Error;

use crate::mac::frame::MacParams;
use crate::mac::token::{Policy, TokenParams};
use crate::medium::{DEFAULT_CS_RANGE, DEFAULT_TX_RANGE};
use crate::network::Protocol;
use crate::sim::SimTime;
use crate::traffic::{TrafficKind, TrafficSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ReceiverPlacement {
    /// Receiver of a transmitter at (x, y) sits at ((x + 100) mod d, y).
    #[default]
    Offset,
    /// Receivers placed uniformly at random in the square.
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub protocol: Protocol,
    pub policy: Policy,
    pub n_transmitters: u32,
    pub area_side: f64,
    pub receiver_placement: ReceiverPlacement,
    pub duration_s: f64,
    pub runs: u32,
    pub seed: u64,
    pub tx_range: f64,
    pub cs_range: f64,
    pub mac: MacParams,
    pub token: TokenParams,
    pub traffic: TrafficSpec,
    lines: HashMap<&'static str, usize>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            protocol: Protocol::Dcf,
            policy: Policy::Lqf,
            n_transmitters: 20,
            area_side: 150.0,
            receiver_placement: ReceiverPlacement::Offset,
            duration_s: 30.0,
            runs: 5,
            seed: 1,
            tx_range: DEFAULT_TX_RANGE,
            cs_range: DEFAULT_CS_RANGE,
            mac: MacParams::default(),
            token: TokenParams::default(),
            traffic: TrafficSpec::default(),
            lines: HashMap::new(),
        }
    }
}

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("line {line}: unknown section [{name}]")]
    UnknownSection { line: usize, name: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: key `{key}` belongs to [{expected}], not [{found}]")]
    WrongSection {
        line: usize,
        key: String,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: invalid value `{value}` for `{key}`: {reason}")]
    InvalidValue {
        line: usize,
        key: String,
        value: String,
        reason: String,
    },
    /// `line` is 0 when the offending value is a default.
    #[error("line {line}: `{key}` {reason}")]
    Invariant {
        line: usize,
        key: String,
        reason: String,
    },
}

const SECTIONS: [&str; 5] = ["experiment", "phy", "mac", "token", "traffic"];

/// Every accepted key and the section it lives in.
pub const KEYS: [(&str, &str); 35] = [
    ("protocol", "experiment"),
    ("policy", "experiment"),
    ("n_transmitters", "experiment"),
    ("area_side", "experiment"),
    ("receiver_placement", "experiment"),
    ("duration", "experiment"),
    ("runs", "experiment"),
    ("seed", "experiment"),
    ("sifs", "phy"),
    ("difs", "phy"),
    ("slot_time", "phy"),
    ("preamble", "phy"),
    ("bit_rate", "phy"),
    ("tx_range", "phy"),
    ("cs_range", "phy"),
    ("cw_min", "mac"),
    ("cw_max", "mac"),
    ("retry_limit", "mac"),
    ("queue_capacity", "mac"),
    ("ack_guard", "mac"),
    ("data_header_bytes", "mac"),
    ("token_header_bytes", "mac"),
    ("ack_bytes", "mac"),
    ("min_ratio", "token"),
    ("max_ratio", "token"),
    ("max_num", "token"),
    ("delta", "token"),
    ("max_p", "token"),
    ("period", "token"),
    ("kind", "traffic"),
    ("packet_size", "traffic"),
    ("rate", "traffic"),
    ("on_mean", "traffic"),
    ("off_mean", "traffic"),
    ("shape", "traffic"),
];

fn lookup(key: &str) -> Option<(&'static str, &'static str)> {
    KEYS.iter().copied().find(|(k, _)| *k == key)
}

fn parse<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse::<T>().map_err(|e| ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        reason: e.to_string(),
    })
}

fn invalid(line: usize, key: &str, value: &str, reason: &str) -> ConfigError {
    ConfigError::InvalidValue {
        line,
        key: key.to_string(),
        value: value.to_string(),
        reason: reason.to_string(),
    }
}

fn micros(line: usize, key: &str, value: &str) -> Result<SimTime, ConfigError> {
    Ok(SimTime(parse::<u64>(line, key, value)?))
}

impl ScenarioConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = ScenarioConfig::default();
        let mut section: Option<String> = None;
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let body = raw.split(['#', ';']).next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            if let Some(rest) = body.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .ok_or_else(|| ConfigError::Syntax {
                        line,
                        msg: format!("unterminated section header `{body}`"),
                    })?
                    .trim();
                if !SECTIONS.contains(&name) {
                    return Err(ConfigError::UnknownSection {
                        line,
                        name: name.to_string(),
                    });
                }
                section = Some(name.to_string());
                continue;
            }
            let (key, value) = body.split_once('=').ok_or_else(|| ConfigError::Syntax {
                line,
                msg: format!("expected `key = value`, got `{body}`"),
            })?;
            let (key, value) = (key.trim(), value.trim());
            if let (Some(found), Some((_, expected))) = (&section, lookup(key)) {
                if found != expected {
                    return Err(ConfigError::WrongSection {
                        line,
                        key: key.to_string(),
                        expected,
                        found: found.clone(),
                    });
                }
            }
            cfg.set_at(line, key, value)?;
        }
        cfg.validate()?;
        Ok(cfg)
    }

    /// Override one key, as a sweep does. The result is not validated.
    pub fn set_key(&mut self, key: &str, value: &str) -> Result<(), ConfigError> {
        self.set_at(0, key, value)
    }

    fn set_at(&mut self, line: usize, key: &str, value: &str) -> Result<(), ConfigError> {
        let key = key.rsplit('.').next().unwrap_or(key);
        let Some((name, _)) = lookup(key) else {
            return Err(ConfigError::UnknownKey {
                line,
                key: key.to_string(),
            });
        };
        match name {
            "protocol" => {
                self.protocol = match value {
                    "dcf" => Protocol::Dcf,
                    "token_dcf" | "tokendcf" => Protocol::TokenDcf,
                    _ => return Err(invalid(line, key, value, "expected dcf or token_dcf")),
                }
            }
            "policy" => {
                self.policy = match value.to_ascii_lowercase().as_str() {
                    "lqf" => Policy::Lqf,
                    "backpressure" => Policy::Backpressure,
                    _ => return Err(invalid(line, key, value, "expected lqf or backpressure")),
                }
            }
            "n_transmitters" => self.n_transmitters = parse(line, key, value)?,
            "area_side" => self.area_side = parse(line, key, value)?,
            "receiver_placement" => {
                self.receiver_placement = match value {
                    "offset" => ReceiverPlacement::Offset,
                    "uniform" => ReceiverPlacement::Uniform,
                    _ => return Err(invalid(line, key, value, "expected offset or uniform")),
                }
            }
            "duration" => self.duration_s = parse(line, key, value)?,
            "runs" => self.runs = parse(line, key, value)?,
            "seed" => self.seed = parse(line, key, value)?,
            "sifs" => self.mac.sifs = micros(line, key, value)?,
            "difs" => self.mac.difs = micros(line, key, value)?,
            "slot_time" => self.mac.slot = micros(line, key, value)?,
            "preamble" => self.mac.preamble = micros(line, key, value)?,
            "bit_rate" => self.mac.bit_rate = parse(line, key, value)?,
            "tx_range" => self.tx_range = parse(line, key, value)?,
            "cs_range" => self.cs_range = parse(line, key, value)?,
            "cw_min" => self.mac.cw_min = parse(line, key, value)?,
            "cw_max" => self.mac.cw_max = parse(line, key, value)?,
            "retry_limit" => self.mac.retry_limit = parse(line, key, value)?,
            "queue_capacity" => self.mac.queue_capacity = parse(line, key, value)?,
            "ack_guard" => self.mac.ack_guard = micros(line, key, value)?,
            "data_header_bytes" => self.mac.data_header_bytes = parse(line, key, value)?,
            "token_header_bytes" => self.mac.token_header_bytes = parse(line, key, value)?,
            "ack_bytes" => self.mac.ack_bytes = parse(line, key, value)?,
            "min_ratio" => self.token.min_ratio = parse(line, key, value)?,
            "max_ratio" => self.token.max_ratio = parse(line, key, value)?,
            "max_num" => self.token.max_num = parse(line, key, value)?,
            "delta" => self.token.delta = parse(line, key, value)?,
            "max_p" => self.token.max_p = parse(line, key, value)?,
            "period" => {
                let s: f64 = parse(line, key, value)?;
                if !(s > 0.0) || !s.is_finite() {
                    return Err(invalid(
                        line,
                        key,
                        value,
                        "must be a positive number of seconds",
                    ));
                }
                self.token.period = SimTime::from_secs_f64(s);
            }
            "kind" => {
                self.traffic.kind = match value {
                    "full_buffer" | "cbr" => TrafficKind::FullBuffer,
                    "pareto" | "pareto_on_off" => TrafficKind::ParetoOnOff,
                    _ => return Err(invalid(line, key, value, "expected full_buffer or pareto")),
                }
            }
            "packet_size" => self.traffic.packet_size = parse(line, key, value)?,
            "rate" => self.traffic.rate = parse(line, key, value)?,
            "on_mean" => self.traffic.on_mean_us = parse(line, key, value)?,
            "off_mean" => self.traffic.off_mean_us = parse(line, key, value)?,
            "shape" => self.traffic.shape = parse(line, key, value)?,
            _ => unreachable!("every key in KEYS is handled"),
        }
        self.lines.insert(name, line);
        Ok(())
    }

    fn violation(&self, key: &'static str, reason: impl Into<String>) -> ConfigError {
        ConfigError::Invariant {
            line: self.lines.get(key).copied().unwrap_or(0),
            key: key.to_string(),
            reason: reason.into(),
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_transmitters < 1 {
            return Err(self.violation("n_transmitters", "must be at least 1"));
        }
        if !(self.area_side > 0.0) || !self.area_side.is_finite() {
            return Err(self.violation("area_side", "must be positive"));
        }
        if !(self.duration_s > 0.0) || !self.duration_s.is_finite() {
            return Err(self.violation("duration", "must be positive"));
        }
        if self.runs < 1 {
            return Err(self.violation("runs", "must be at least 1"));
        }
        if !(self.tx_range > 0.0) {
            return Err(self.violation("tx_range", "must be positive"));
        }
        if !(self.cs_range >= self.tx_range) {
            return Err(self.violation("cs_range", "must be at least tx_range"));
        }
        if self.mac.slot.0 == 0 {
            return Err(self.violation("slot_time", "must be at least 1 µs"));
        }
        if self.mac.bit_rate == 0 {
            return Err(self.violation("bit_rate", "must be positive"));
        }
        if self.mac.cw_min < 1 {
            return Err(self.violation("cw_min", "must be at least 1"));
        }
        if self.mac.cw_max < self.mac.cw_min {
            return Err(self.violation("cw_max", "must be at least cw_min"));
        }
        if self.mac.queue_capacity < 1 {
            return Err(self.violation("queue_capacity", "must be at least 1"));
        }
        if let Err((key, reason)) = self.token.validate() {
            return Err(self.violation(key, reason));
        }
        if self.traffic.packet_size == 0 {
            return Err(self.violation("packet_size", "must be positive"));
        }
        if let Err(e) = self.traffic.validate() {
            let key = match e {
                crate::traffic::TrafficError::InvalidRate(_) => "rate",
                _ => "shape",
            };
            return Err(self.violation(key, e.to_string()));
        }
        Ok(())
    }

    pub fn horizon(&self) -> SimTime {
        SimTime::from_secs_f64(self.duration_s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_config_takes_table_defaults() {
        let cfg = ScenarioConfig::parse("protocol = token_dcf\n").unwrap();
        assert_eq!(cfg.protocol, Protocol::TokenDcf);
        assert_eq!(cfg.token.max_num, 20);
        assert_eq!(cfg.token.delta, 0.1);
        assert_eq!(cfg.token.max_p, 0.9);
        assert_eq!(cfg.token.period, SimTime(100_000));
        assert_eq!(cfg.mac.slot, SimTime(9));
        assert_eq!((cfg.mac.sifs, cfg.mac.difs), (SimTime(10), SimTime(28)));
        assert_eq!((cfg.mac.cw_min, cfg.mac.cw_max), (16, 1024));
        assert_eq!((cfg.duration_s, cfg.runs), (30.0, 5));
    }

    #[test]
    fn sections_comments_and_overrides() {
        let text = "\
# scenario
[experiment]
n_transmitters = 5   ; fewer stations
duration = 1.5

[traffic]
kind = pareto
packet_size = 1500
rate = 1e8
";
        let cfg = ScenarioConfig::parse(text).unwrap();
        assert_eq!(cfg.n_transmitters, 5);
        assert_eq!(cfg.duration_s, 1.5);
        assert_eq!(cfg.traffic.kind, TrafficKind::ParetoOnOff);
        assert_eq!(cfg.traffic.rate, 1e8);
        assert_eq!(cfg.horizon(), SimTime(1_500_000));
    }

    #[test]
    fn zero_cw_min_is_rejected_with_line() {
        let err = ScenarioConfig::parse("[mac]\ncw_min = 0\n").unwrap_err();
        assert_eq!(
            err,
            ConfigError::Invariant {
                line: 2,
                key: "cw_min".into(),
                reason: "must be at least 1".into()
            }
        );
    }

    #[test]
    fn unknown_and_misplaced_keys() {
        assert_eq!(
            ScenarioConfig::parse("[phy]\nwarp = 9\n").unwrap_err(),
            ConfigError::UnknownKey {
                line: 2,
                key: "warp".into()
            }
        );
        assert!(matches!(
            ScenarioConfig::parse("[phy]\ncw_min = 8\n").unwrap_err(),
            ConfigError::WrongSection { line: 2, .. }
        ));
        assert!(matches!(
            ScenarioConfig::parse("[radio]\n").unwrap_err(),
            ConfigError::UnknownSection { line: 1, .. }
        ));
    }

    #[test]
    fn malformed_values_name_the_key() {
        let err = ScenarioConfig::parse("\n\nslot_time = fast\n").unwrap_err();
        match err {
            ConfigError::InvalidValue { line, key, .. } => {
                assert_eq!((line, key.as_str()), (3, "slot_time"))
            }
            other => panic!("unexpected {other:?}"),
        }
        assert!(matches!(
            ScenarioConfig::parse("just words").unwrap_err(),
            ConfigError::Syntax { line: 1, .. }
        ));
    }

    #[test]
    fn set_key_accepts_qualified_names() {
        let mut cfg = ScenarioConfig::default();
        cfg.set_key("traffic.packet_size", "1500").unwrap();
        cfg.set_key("n_transmitters", "30").unwrap();
        assert_eq!((cfg.traffic.packet_size, cfg.n_transmitters), (1500, 30));
        assert!(cfg.set_key("bogus", "1").is_err());
    }
}
