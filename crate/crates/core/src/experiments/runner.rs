//! Single runs and multi-run scenarios.

use rayon::prelude::*;

use crate::metrics::MetricsReport;
use crate::network::{simulate, NetworkConfig, Protocol, RunOptions, RunOutput};

use super::config::ScenarioConfig;
use super::topology::generate_topology;
use super::ExperimentError;

pub fn network_config(cfg: &ScenarioConfig, run: u32) -> NetworkConfig {
    NetworkConfig {
        protocol: cfg.protocol,
        policy: cfg.policy,
        mac: cfg.mac.clone(),
        token: cfg.token.clone(),
        traffic: cfg.traffic.clone(),
        seed: cfg.seed,
        run,
    }
}

#[derive(Debug, Clone)]
pub struct RunResult {
    pub run: u32,
    pub report: MetricsReport,
    pub output: RunOutput,
}

/// Simulate run `run` of a scenario: its own topology and random streams.
pub fn run_once(
    cfg: &ScenarioConfig,
    run: u32,
    opts: RunOptions,
) -> Result<RunResult, ExperimentError> {
    cfg.validate()?;
    let (topo, flows) = generate_topology(cfg, run)?;
    let output = simulate(&network_config(cfg, run), topo, &flows, cfg.horizon(), opts)?;
    let report = output.record.summarize(cfg.mac.slot)?;
    log::debug!(
        "{} run {run}: {:.0} bps over {} events",
        cfg.protocol.as_str(),
        report.throughput_bps,
        output.events_fired
    );
    Ok(RunResult {
        run,
        report,
        output,
    })
}

/// One scenario under one protocol, averaged over its runs.
#[derive(Debug, Clone, PartialEq)]
pub struct ResultRow {
    pub scenario_id: String,
    /// Abscissa for plot data: the swept value, or the station count.
    pub x: String,
    pub protocol: Protocol,
    pub n_tx: u32,
    pub area: f64,
    pub pkt_size: u32,
    pub runs: Vec<MetricsReport>,
    pub average: MetricsReport,
}

/// Run every run of `cfg` (in parallel) and average the reports.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    scenario_id: &str,
    x: &str,
) -> Result<ResultRow, ExperimentError> {
    cfg.validate()?;
    let runs: Vec<MetricsReport> = (0..cfg.runs)
        .into_par_iter()
        .map(|run| run_once(cfg, run, RunOptions::default()).map(|r| r.report))
        .collect::<Result<_, _>>()?;
    Ok(ResultRow {
        scenario_id: scenario_id.to_string(),
        x: x.to_string(),
        protocol: cfg.protocol,
        n_tx: cfg.n_transmitters,
        area: cfg.area_side,
        pkt_size: cfg.traffic.packet_size,
        average: MetricsReport::average(&runs),
        runs,
    })
}
