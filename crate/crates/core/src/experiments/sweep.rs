//! Parameter sweeps and their CSV / plot-data output.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::metrics::MetricsReport;
use crate::network::Protocol;

use super::config::ScenarioConfig;
use super::runner::{run_scenario, ResultRow};
use super::ExperimentError;

/// Run every `param = value` under both protocols. Rows come back in
/// value order, DCF before Token-DCF within each value.
pub fn run_sweep(
    base: &ScenarioConfig,
    param: &str,
    values: &[String],
) -> Result<Vec<ResultRow>, ExperimentError> {
    if values.is_empty() {
        return Err(ExperimentError::EmptySweep);
    }
    let mut scenarios = Vec::with_capacity(values.len() * 2);
    for value in values {
        for protocol in Protocol::ALL {
            let mut cfg = base.clone();
            cfg.set_key(param, value)?;
            cfg.protocol = protocol;
            cfg.validate()?;
            scenarios.push((cfg, format!("{param}={value}"), value.clone()));
        }
    }
    scenarios
        .par_iter()
        .map(|(cfg, id, x)| run_scenario(cfg, id, x))
        .collect()
}

/// One line of `results.csv`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CsvRow {
    pub scenario_id: String,
    pub protocol: String,
    pub n_tx: u32,
    pub area: f64,
    pub pkt_size: u32,
    /// Run index, or `avg` for the averaged row.
    pub run: String,
    pub throughput_bps: f64,
    pub access_delay_us: Option<f64>,
    pub idle_slots: Option<f64>,
    pub collision_freq: Option<f64>,
    pub drops: f64,
}

impl CsvRow {
    fn new(row: &ResultRow, run: String, r: &MetricsReport) -> Self {
        CsvRow {
            scenario_id: row.scenario_id.clone(),
            protocol: row.protocol.as_str().to_string(),
            n_tx: row.n_tx,
            area: row.area,
            pkt_size: row.pkt_size,
            run,
            throughput_bps: r.throughput_bps,
            access_delay_us: r.access_delay_us,
            idle_slots: r.idle_slots,
            collision_freq: r.collision_freq,
            drops: r.drops,
        }
    }

    pub fn report(&self) -> MetricsReport {
        MetricsReport {
            throughput_bps: self.throughput_bps,
            access_delay_us: self.access_delay_us,
            idle_slots: self.idle_slots,
            collision_freq: self.collision_freq,
            drops: self.drops,
            efficiency: None,
        }
    }

    pub fn is_average(&self) -> bool {
        self.run == "avg"
    }
}

/// Per-run rows followed by the `avg` row, for each result in order.
pub fn csv_rows(rows: &[ResultRow]) -> Vec<CsvRow> {
    let mut out = Vec::new();
    for row in rows {
        for (i, r) in row.runs.iter().enumerate() {
            out.push(CsvRow::new(row, i.to_string(), r));
        }
        out.push(CsvRow::new(row, "avg".to_string(), &row.average));
    }
    out
}

pub fn write_results_csv(path: &Path, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    let mut w = csv::Writer::from_path(path)?;
    for r in csv_rows(rows) {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_results_csv(path: &Path) -> Result<Vec<CsvRow>, ExperimentError> {
    let mut r = csv::Reader::from_path(path)?;
    Ok(r.deserialize().collect::<Result<_, _>>()?)
}

/// Recompute the averages of every (scenario, protocol) group from its
/// per-run rows, in file order.
pub fn reaverage(rows: &[CsvRow]) -> Vec<(String, String, MetricsReport)> {
    let mut groups: Vec<(String, String, Vec<MetricsReport>)> = Vec::new();
    for row in rows.iter().filter(|r| !r.is_average()) {
        match groups.last_mut() {
            Some((id, proto, runs)) if *id == row.scenario_id && *proto == row.protocol => {
                runs.push(row.report())
            }
            _ => groups.push((
                row.scenario_id.clone(),
                row.protocol.clone(),
                vec![row.report()],
            )),
        }
    }
    groups
        .into_iter()
        .map(|(id, proto, runs)| (id, proto, MetricsReport::average(&runs)))
        .collect()
}

pub const PLOT_METRICS: [&str; 5] = [
    "throughput_bps",
    "access_delay_us",
    "idle_slots",
    "collision_freq",
    "drops",
];

fn metric(r: &MetricsReport, name: &str) -> Option<f64> {
    match name {
        "throughput_bps" => Some(r.throughput_bps),
        "access_delay_us" => r.access_delay_us,
        "idle_slots" => r.idle_slots,
        "collision_freq" => r.collision_freq,
        "drops" => Some(r.drops),
        _ => None,
    }
}

/// Write `<metric>_<protocol>.dat` files: `x value` per line, averaged
/// over runs. Absent values are skipped.
pub fn write_plot_data(dir: &Path, rows: &[ResultRow]) -> Result<(), ExperimentError> {
    for name in PLOT_METRICS {
        for protocol in Protocol::ALL {
            let path = dir.join(format!("{name}_{}.dat", protocol.as_str()));
            let mut w = BufWriter::new(File::create(path)?);
            for row in rows.iter().filter(|r| r.protocol == protocol) {
                if let Some(v) = metric(&row.average, name) {
                    writeln!(w, "{} {}", row.x, v)?;
                }
            }
            w.flush()?;
        }
    }
    Ok(())
}
