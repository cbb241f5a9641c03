use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use tokendcf::experiments::{
    run_scenario, run_sweep, write_plot_data, write_results_csv, ExperimentError, ResultRow,
    ScenarioConfig,
};

/// Discrete-event simulator comparing IEEE 802.11 DCF with Token-DCF.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario with the configured protocol.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Sweep one parameter under both protocols.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Config key to vary, e.g. `n_transmitters` or `traffic.rate`.
        #[arg(long)]
        param: String,
        /// Comma-separated values.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Check a config file without running anything.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error("{path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Config {
        path: PathBuf,
        source: tokendcf::experiments::ConfigError,
    },
    #[error(transparent)]
    Experiment(#[from] ExperimentError),
    #[error("{path}: {source}")]
    Output {
        path: PathBuf,
        source: std::io::Error,
    },
}

fn load(path: &Path) -> Result<ScenarioConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|source| CliError::Read {
        path: path.to_path_buf(),
        source,
    })?;
    ScenarioConfig::parse(&text).map_err(|source| CliError::Config {
        path: path.to_path_buf(),
        source,
    })
}

fn emit(out: &Path, rows: &[ResultRow]) -> Result<(), CliError> {
    fs::create_dir_all(out).map_err(|source| CliError::Output {
        path: out.to_path_buf(),
        source,
    })?;
    write_results_csv(&out.join("results.csv"), rows)?;
    write_plot_data(out, rows)?;
    for row in rows {
        println!(
            "{:<24} {:<9} throughput {:>12.0} bps  delay {:>10} µs  idle {:>6} slots  collisions {:>6}",
            row.scenario_id,
            row.protocol.as_str(),
            row.average.throughput_bps,
            fmt(row.average.access_delay_us, 0),
            fmt(row.average.idle_slots, 2),
            fmt(row.average.collision_freq, 3),
        );
    }
    log::info!("wrote {}", out.join("results.csv").display());
    Ok(())
}

fn fmt(v: Option<f64>, prec: usize) -> String {
    v.map_or_else(|| "-".to_string(), |v| format!("{v:.prec$}"))
}

fn execute(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load(&config)?;
            let row = run_scenario(&cfg, "base", &cfg.n_transmitters.to_string())?;
            emit(&out, &[row])
        }
        Command::Sweep {
            config,
            param,
            values,
            out,
        } => {
            let cfg = load(&config)?;
            let rows = run_sweep(&cfg, &param, &values)?;
            emit(&out, &rows)
        }
        Command::Validate { config } => {
            let cfg = load(&config)?;
            println!(
                "{}: ok ({}, {} transmitters, {} s x {} runs)",
                config.display(),
                cfg.protocol.as_str(),
                cfg.n_transmitters,
                cfg.duration_s,
                cfg.runs
            );
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
