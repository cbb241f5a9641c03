//! Random station placement.

use crate::medium::{MediumError, Position, Topology};
use crate::network::Flow;
use crate::sim::{RandomStream, StationId, StreamId, StreamPurpose};

use super::config::{ReceiverPlacement, ScenarioConfig};

/// Offset between a transmitter and its receiver along x, in meters.
pub const RECEIVER_OFFSET: f64 = 100.0;

/// Receiver position for a transmitter at `tx` in a square of side `d`.
pub fn offset_receiver(tx: Position, d: f64) -> Position {
    Position::new((tx.x + RECEIVER_OFFSET).rem_euclid(d), tx.y)
}

/// Transmitters get ids `0..n`, their receivers `n..2n`; flow `i` runs
/// from `i` to `n + i`. Each run index yields a fresh layout.
pub fn generate_topology(
    cfg: &ScenarioConfig,
    run: u32,
) -> Result<(Topology, Vec<Flow>), MediumError> {
    let d = cfg.area_side;
    let n = cfg.n_transmitters as usize;
    let mut rng = RandomStream::new(
        cfg.seed,
        StreamId {
            run,
            station: 0,
            purpose: StreamPurpose::Topology,
        },
    );
    let point =
        |rng: &mut RandomStream| Position::new(rng.uniform_f64() * d, rng.uniform_f64() * d);
    let transmitters: Vec<Position> = (0..n).map(|_| point(&mut rng)).collect();
    let receivers: Vec<Position> = match cfg.receiver_placement {
        ReceiverPlacement::Offset => transmitters
            .iter()
            .map(|&p| offset_receiver(p, d))
            .collect(),
        ReceiverPlacement::Uniform => (0..n).map(|_| point(&mut rng)).collect(),
    };
    let flows = (0..n as StationId)
        .map(|i| Flow {
            src: i,
            dst: n as StationId + i,
        })
        .collect();
    let mut positions = transmitters;
    positions.extend(receivers);
    Ok((
        Topology::new(positions, cfg.tx_range, cfg.cs_range, d)?,
        flows,
    ))
}
