//! Scenario configuration, topology generation, runs and sweeps.

pub mod config;
pub mod runner;
pub mod sweep;
pub mod topology;

use thiserror::Error;

pub use config::{ConfigError, ReceiverPlacement, ScenarioConfig};
pub use runner::{network_config, run_once, run_scenario, ResultRow, RunResult};
pub use sweep::{
    read_results_csv, reaverage, run_sweep, write_plot_data, write_results_csv, CsvRow,
};
pub use topology::generate_topology;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Network(#[from] crate::network::NetworkError),
    #[error(transparent)]
    Medium(#[from] crate::medium::MediumError),
    #[error(transparent)]
    Metrics(#[from] crate::metrics::MetricsError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("sweep needs at least one value")]
    EmptySweep,
}
