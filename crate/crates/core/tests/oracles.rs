mod common;

use std::process::Command;

use proptest::prelude::*;

use tokendcf::experiments::{
    read_results_csv, reaverage, run_once, run_sweep, write_results_csv, ScenarioConfig,
};
use tokendcf::mac::frame::MacParams;
use tokendcf::mac::token::{Policy, SchedulerState, TokenParams};
use tokendcf::network::{Protocol, RunOptions};
use tokendcf::sim::{pareto_scale, RandomStream, StationId, StreamId, StreamPurpose};
use tokendcf::traffic::{ParetoOnOff, TrafficSpec};

use common::{agree, small, AdaptModel};

fn stream(seed: u64, purpose: StreamPurpose) -> RandomStream {
    RandomStream::new(
        seed,
        StreamId {
            run: 0,
            station: 0,
            purpose,
        },
    )
}

#[test]
fn backoff_draws_are_uniform_over_the_window() {
    let mut rng = stream(42, StreamPurpose::Backoff);
    let mut counts = [0u64; 17];
    let n = 1_000_000;
    for _ in 0..n {
        counts[rng.uniform_int(0, 16).unwrap() as usize] += 1;
    }
    let expected = n as f64 / 17.0;
    for (v, c) in counts.iter().enumerate() {
        let rel = (*c as f64 - expected).abs() / expected;
        assert!(rel < 0.01, "value {v}: {c} draws, {rel:.4} off");
    }
    // Pearson chi-square, 16 degrees of freedom; 0.1% critical value 39.25.
    let chi2: f64 = counts
        .iter()
        .map(|c| (*c as f64 - expected).powi(2) / expected)
        .sum();
    assert!(chi2 < 39.25, "chi2 = {chi2}");
}

#[test]
fn pareto_samples_respect_scale_and_mean() {
    let scale = pareto_scale(50_000.0, 1.5).unwrap();
    assert!((scale - 50_000.0 / 3.0).abs() < 1e-9);
    let mut rng = stream(7, StreamPurpose::Traffic);
    let n = 10_000_000;
    let mut sum = 0.0;
    for _ in 0..n {
        let x = rng.pareto(50_000.0, 1.5).unwrap();
        assert!(x >= scale);
        sum += x;
    }
    let mean = sum / n as f64;
    assert!((mean - 50_000.0).abs() / 50_000.0 < 0.05, "mean {mean}");
}

#[test]
fn on_off_source_converges_to_its_offered_load() {
    // Heavy-tailed periods converge slowly; 10^5 s of virtual time.
    let spec = TrafficSpec::pareto(1500, 1e6);
    let mut gen = ParetoOnOff::new(&spec, stream(3, StreamPurpose::Traffic)).unwrap();
    let horizon = 1e11;
    let mut packets = 0u64;
    while (gen.next_arrival().0 as f64) < horizon {
        packets += 1;
        gen.advance();
    }
    let load = packets as f64 * 1500.0 * 8.0 / (horizon / 1e6);
    let expected = spec.offered_load_bps();
    assert_eq!(expected, 5e5);
    assert!((load - expected).abs() / expected < 0.05, "load {load}");
}

#[test]
fn lone_sender_matches_the_cycle_model() {
    let cfg = small(Protocol::Dcf, 1, 150.0, 500, 11, 10.0);
    let r = run_once(&cfg, 0, RunOptions::default()).unwrap().report;
    let p = MacParams::default();
    let t_data = p
        .airtime(&tokendcf::mac::frame::MacFrame::data(0, 1, 500, 0), false)
        .0 as f64;
    let mean_slots = f64::from(p.cw_min) / 2.0;
    let cycle = p.difs.0 as f64
        + mean_slots * p.slot.0 as f64
        + t_data
        + p.sifs.0 as f64
        + p.ack_airtime().0 as f64;
    let model = 500.0 * 8.0 / (cycle * 1e-6);
    assert!(
        (r.throughput_bps - model).abs() / model < 0.02,
        "{} vs {model}",
        r.throughput_bps
    );
    assert_eq!(r.collision_freq, Some(0.0));
}

#[derive(Debug, Clone)]
enum Step {
    Heard(StationId),
    Reset,
}

fn steps() -> impl Strategy<Value = (u32, Vec<Step>)> {
    (1u32..30).prop_flat_map(|pool| {
        let step = prop_oneof![
            40 => (0..pool).prop_map(Step::Heard),
            1 => Just(Step::Reset),
        ];
        (Just(pool), prop::collection::vec(step, 1..400))
    })
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 2000, .. ProptestConfig::default() })]

    #[test]
    fn adapt_agrees_with_the_pseudocode((_, seq) in steps()) {
        let mut st = SchedulerState::new(0, TokenParams::default(), Policy::Lqf);
        let mut model = AdaptModel::new(0);
        for step in seq {
            match step {
                Step::Heard(src) => {
                    st.adapt(src);
                    model.adapt(src);
                }
                Step::Reset => {
                    st.period_reset();
                    model.reset();
                }
            }
            if let Err(e) = agree(&model, &st) {
                return Err(TestCaseError::fail(e));
            }
        }
    }
}

#[test]
fn sweep_emits_one_row_per_value_and_protocol() {
    let mut base = small(Protocol::Dcf, 5, 150.0, 500, 5, 0.1);
    base.runs = 2;
    let values: Vec<String> = ["5", "10", "20", "30"]
        .iter()
        .map(|s| s.to_string())
        .collect();
    let rows = run_sweep(&base, "n_transmitters", &values).unwrap();
    assert_eq!(rows.len(), 8);
    assert_eq!(rows[0].protocol, Protocol::Dcf);
    assert_eq!(rows[1].protocol, Protocol::TokenDcf);
    assert_eq!(rows[7].n_tx, 30);

    // Dropping a value leaves the other rows untouched.
    let fewer = run_sweep(&base, "n_transmitters", &values[1..]).unwrap();
    assert_eq!(&rows[2..], &fewer[..]);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("results.csv");
    write_results_csv(&path, &rows).unwrap();
    let first = std::fs::read(&path).unwrap();
    let back = read_results_csv(&path).unwrap();
    assert_eq!(back.len(), 8 * 3);
    let recomputed = reaverage(&back);
    assert_eq!(recomputed.len(), rows.len());
    for ((id, proto, avg), row) in recomputed.iter().zip(&rows) {
        assert_eq!(
            (id.as_str(), proto.as_str()),
            (row.scenario_id.as_str(), row.protocol.as_str())
        );
        let mut expected = row.average.clone();
        expected.efficiency = None;
        assert_eq!(*avg, expected);
    }
    for (csv_avg, row) in back.iter().filter(|r| r.is_average()).zip(&rows) {
        let mut expected = row.average.clone();
        expected.efficiency = None;
        assert_eq!(csv_avg.report(), expected);
    }

    // Same inputs, same bytes.
    let again = run_sweep(&base, "n_transmitters", &values).unwrap();
    write_results_csv(&path, &again).unwrap();
    assert_eq!(std::fs::read(&path).unwrap(), first);
}

#[test]
fn empty_sweep_is_an_error() {
    assert!(run_sweep(&ScenarioConfig::default(), "n_transmitters", &[]).is_err());
}

#[test]
fn rate_sweep_has_six_points_per_protocol() {
    let mut base = small(Protocol::Dcf, 3, 150.0, 1500, 1, 0.05);
    base.traffic = TrafficSpec::pareto(1500, 1e3);
    let values: Vec<String> = (3..=8).map(|e| format!("1e{e}")).collect();
    let rows = run_sweep(&base, "traffic.rate", &values).unwrap();
    for proto in Protocol::ALL {
        assert_eq!(rows.iter().filter(|r| r.protocol == proto).count(), 6);
    }
}

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_tokendcf"))
}

#[test]
fn cli_validate_run_and_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("smoke.ini");
    std::fs::write(
        &cfg,
        "[experiment]\nprotocol = token_dcf\nn_transmitters = 5\nduration = 1\nruns = 2\n",
    )
    .unwrap();

    let ok = cli()
        .args(["validate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert!(ok.status.success());

    let out = dir.path().join("run");
    let run = cli()
        .args(["run", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        run.status.success(),
        "{}",
        String::from_utf8_lossy(&run.stderr)
    );
    let rows = read_results_csv(&out.join("results.csv")).unwrap();
    let avg = rows.iter().find(|r| r.is_average()).unwrap();
    assert_eq!(avg.protocol, "token_dcf");
    assert!(avg.throughput_bps > 0.0);

    let out = dir.path().join("sweep");
    let sweep = cli()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--param", "packet_size", "--values", "500,1500", "--out"])
        .arg(&out)
        .output()
        .unwrap();
    assert!(
        sweep.status.success(),
        "{}",
        String::from_utf8_lossy(&sweep.stderr)
    );
    let dat = std::fs::read_to_string(out.join("throughput_bps_token_dcf.dat")).unwrap();
    let xs: Vec<&str> = dat
        .lines()
        .map(|l| l.split_whitespace().next().unwrap())
        .collect();
    assert_eq!(xs, ["500", "1500"]);

    let bad = dir.path().join("bad.ini");
    std::fs::write(&bad, "[mac]\ncw_min = 0\n").unwrap();
    let err = cli()
        .args(["validate", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!err.status.success());
    let msg = String::from_utf8_lossy(&err.stderr);
    assert!(msg.contains("cw_min") && msg.contains("line 2"), "{msg}");
}
