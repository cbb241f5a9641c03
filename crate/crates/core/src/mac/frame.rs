use crate::sim::{SimTime, StationId};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum FrameKind {
    Data,
    Ack,
}

/// A MAC frame on the air. Data frames carry the scheduling header
/// (`privileged`, `q_len`); for plain DCF those fields stay empty.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MacFrame {
    pub kind: FrameKind,
    pub src: StationId,
    pub dst: StationId,
    pub payload_bytes: u32,
    pub seq: u64,
    pub privileged: Option<StationId>,
    pub q_len: u32,
}

impl MacFrame {
    pub fn data(src: StationId, dst: StationId, payload_bytes: u32, seq: u64) -> Self {
        MacFrame {
            kind: FrameKind::Data,
            src,
            dst,
            payload_bytes,
            seq,
            privileged: None,
            q_len: 0,
        }
    }

    pub fn ack(src: StationId, dst: StationId, seq: u64) -> Self {
        MacFrame {
            kind: FrameKind::Ack,
            src,
            dst,
            payload_bytes: 0,
            seq,
            privileged: None,
            q_len: 0,
        }
    }

    pub fn is_data(&self) -> bool {
        self.kind == FrameKind::Data
    }
}

/// Interframe spaces, PHY timing and MAC sizes.
#[derive(Debug, Clone, PartialEq)]
pub struct MacParams {
    pub sifs: SimTime,
    pub difs: SimTime,
    pub slot: SimTime,
    pub preamble: SimTime,
    pub bit_rate: u64,
    pub cw_min: u32,
    pub cw_max: u32,
    pub retry_limit: u32,
    pub queue_capacity: usize,
    /// Extra wait past `SIFS + T_ack` before declaring the ACK lost.
    pub ack_guard: SimTime,
    pub data_header_bytes: u32,
    /// Bytes the scheduling header adds to Token-DCF data frames.
    pub token_header_bytes: u32,
    pub ack_bytes: u32,
}

impl Default for MacParams {
    fn default() -> Self {
        MacParams {
            sifs: SimTime(10),
            difs: SimTime(28),
            slot: SimTime(9),
            preamble: SimTime(16),
            bit_rate: 54_000_000,
            cw_min: 16,
            cw_max: 1024,
            retry_limit: 7,
            queue_capacity: 50,
            ack_guard: SimTime(20),
            data_header_bytes: 34,
            token_header_bytes: 4,
            ack_bytes: 14,
        }
    }
}

impl MacParams {
    /// MAC header length of `frame` in bytes.
    pub fn header_bytes(&self, kind: FrameKind, token_header: bool) -> u32 {
        match kind {
            FrameKind::Ack => self.ack_bytes,
            FrameKind::Data if token_header => self.data_header_bytes + self.token_header_bytes,
            FrameKind::Data => self.data_header_bytes,
        }
    }

    pub fn airtime(&self, frame: &MacFrame, token_header: bool) -> SimTime {
        frame_airtime(
            self.header_bytes(frame.kind, token_header),
            frame.payload_bytes,
            self.preamble,
            self.bit_rate,
        )
    }

    pub fn ack_airtime(&self) -> SimTime {
        frame_airtime(self.ack_bytes, 0, self.preamble, self.bit_rate)
    }

    /// How long a sender waits after its data frame ends before giving up on the ACK.
    pub fn ack_timeout(&self) -> SimTime {
        self.sifs + self.ack_airtime() + self.ack_guard
    }
}

/// Preamble plus header and payload bits at `bit_rate`, rounded up to whole µs.
pub fn frame_airtime(
    header_bytes: u32,
    payload_bytes: u32,
    preamble: SimTime,
    bit_rate: u64,
) -> SimTime {
    assert!(bit_rate > 0, "bit rate must be positive");
    let bits = 8 * (u64::from(header_bytes) + u64::from(payload_bytes));
    preamble + SimTime((bits * 1_000_000).div_ceil(bit_rate))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn airtime_examples() {
        let p = MacParams::default();
        assert_eq!(p.airtime(&MacFrame::ack(1, 0, 0), false), SimTime(19));
        assert_eq!(p.airtime(&MacFrame::data(0, 1, 500, 0), false), SimTime(96));
        assert_eq!(
            p.airtime(&MacFrame::data(0, 1, 1500, 0), true),
            SimTime(244)
        );
        assert_eq!(p.ack_timeout(), SimTime(10 + 19 + 20));
    }

    #[test]
    fn airtime_rounds_up_to_whole_micros() {
        // 8 bits at 1 Mbps is exactly 8 µs; one more bit of payload is impossible,
        // so check a rate that does not divide evenly instead.
        assert_eq!(frame_airtime(1, 0, SimTime(0), 1_000_000), SimTime(8));
        assert_eq!(frame_airtime(1, 0, SimTime(0), 3_000_000), SimTime(3));
    }
}
