//! End-to-end acceptance checks. Prints one PASS/FAIL line per criterion
//! and exits non-zero if any criterion fails.

mod common;

use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tokendcf::experiments::{generate_topology, run_once, run_scenario, ResultRow, ScenarioConfig};
use tokendcf::mac::frame::{MacFrame, MacParams};
use tokendcf::mac::token::{Policy, SchedulerState, TokenParams};
use tokendcf::medium::TxRecord;
use tokendcf::network::{Protocol, RunOptions};
use tokendcf::sim::StationId;
use tokendcf::traffic::TrafficSpec;

use common::{agree, AdaptModel};

const STATIONS: [u32; 6] = [5, 10, 15, 20, 25, 30];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn scenario(protocol: Protocol, n: u32, area: f64, traffic: TrafficSpec) -> ScenarioConfig {
    let mut cfg = ScenarioConfig::default();
    cfg.protocol = protocol;
    cfg.n_transmitters = n;
    cfg.area_side = area;
    cfg.traffic = traffic;
    cfg
}

/// (DCF row, Token-DCF row) for one scenario at full scale: 30 s x 5 runs.
fn pair(n: u32, area: f64, traffic: TrafficSpec) -> (ResultRow, ResultRow) {
    let run = |p| {
        let cfg = scenario(p, n, area, traffic.clone());
        run_scenario(&cfg, &format!("n={n}"), &n.to_string()).expect("scenario runs")
    };
    (run(Protocol::Dcf), run(Protocol::TokenDcf))
}

fn ratio(a: f64, b: f64) -> f64 {
    a / b
}

fn delay(r: &ResultRow) -> f64 {
    r.average
        .access_delay_us
        .expect("saturated runs deliver packets")
}

fn idle(r: &ResultRow) -> f64 {
    r.average.idle_slots.expect("saturated runs transmit")
}

fn collisions(r: &ResultRow) -> f64 {
    r.average.collision_freq.expect("saturated runs transmit")
}

fn criterion_1(sweep: &[(ResultRow, ResultRow)], elapsed: Duration) -> Outcome {
    let (dcf, tok) = &sweep[3];
    let r = ratio(tok.average.throughput_bps, dcf.average.throughput_bps);
    outcome(
        r >= 2.0 && elapsed < Duration::from_secs(120),
        format!(
            "500 B, 20 tx: DCF {:.2} Mbps, Token-DCF {:.2} Mbps, ratio {r:.3} (need >= 2.0); runtime {:.1} s (need < 120 s)",
            dcf.average.throughput_bps / 1e6,
            tok.average.throughput_bps / 1e6,
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_2(sweep: &[(ResultRow, ResultRow)]) -> Outcome {
    let (dcf500, tok500) = &sweep[3];
    let r500 = ratio(tok500.average.throughput_bps, dcf500.average.throughput_bps);
    let (dcf, tok) = pair(20, 150.0, TrafficSpec::full_buffer(1500));
    let r = ratio(tok.average.throughput_bps, dcf.average.throughput_bps);
    outcome(
        (1.4..=2.3).contains(&r) && r < r500,
        format!(
            "1500 B, 20 tx: DCF {:.2} Mbps, Token-DCF {:.2} Mbps, ratio {r:.3} (need [1.4, 2.3] and < 500 B ratio {r500:.3})",
            dcf.average.throughput_bps / 1e6,
            tok.average.throughput_bps / 1e6,
        ),
    )
}

fn criterion_3(sweep: &[(ResultRow, ResultRow)]) -> Outcome {
    let (dcf, tok) = &sweep[3];
    let r = ratio(delay(tok), delay(dcf));
    outcome(
        r <= 0.6,
        format!(
            "500 B, 20 tx: DCF {:.0} µs, Token-DCF {:.0} µs, ratio {r:.3} (need <= 0.6)",
            delay(dcf),
            delay(tok)
        ),
    )
}

fn criterion_4(sweep: &[(ResultRow, ResultRow)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (dcf, tok) in sweep.iter().filter(|(d, _)| (10..=30).contains(&d.n_tx)) {
        let (d, t) = (idle(dcf), idle(tok));
        pass &= t <= 3.0 && t <= 0.3 * d;
        parts.push(format!("n={} {t:.2}/{d:.2}", dcf.n_tx));
    }
    outcome(
        pass,
        format!(
            "Token-DCF/DCF idle slots: {} (need <= 3 and <= 0.3x)",
            parts.join(", ")
        ),
    )
}

fn criterion_5(sweep: &[(ResultRow, ResultRow)]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for (dcf, tok) in sweep {
        pass &= collisions(tok) < collisions(dcf);
        parts.push(format!(
            "n={} {:.3}/{:.3}",
            dcf.n_tx,
            collisions(tok),
            collisions(dcf)
        ));
    }
    for w in sweep.windows(2) {
        pass &= collisions(&w[1].0) >= collisions(&w[0].0);
        pass &= collisions(&w[1].1) >= collisions(&w[0].1);
    }
    outcome(
        pass,
        format!(
            "Token-DCF/DCF collision frequency: {} (need Token < DCF, both non-decreasing)",
            parts.join(", ")
        ),
    )
}

fn criterion_6() -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for n in [10, 20, 30] {
        let (dcf, tok) = pair(n, 800.0, TrafficSpec::full_buffer(1500));
        let r = ratio(tok.average.throughput_bps, dcf.average.throughput_bps);
        let d = ratio(delay(&tok), delay(&dcf));
        pass &= r >= 1.5 && d <= 0.7;
        parts.push(format!("n={n} throughput x{r:.3} delay x{d:.3}"));
    }
    outcome(
        pass,
        format!(
            "800x800 m, 1500 B: {} (need >= 1.5 and <= 0.7)",
            parts.join(", ")
        ),
    )
}

fn criterion_7() -> Outcome {
    let (dcf_lo, tok_lo) = pair(20, 150.0, TrafficSpec::pareto(1500, 1e3));
    let (dcf_hi, tok_hi) = pair(20, 150.0, TrafficSpec::pareto(1500, 1e8));
    let gap = (tok_lo.average.throughput_bps - dcf_lo.average.throughput_bps).abs()
        / dcf_lo.average.throughput_bps;
    let r = ratio(tok_hi.average.throughput_bps, dcf_hi.average.throughput_bps);
    outcome(
        gap <= 0.05 && r >= 1.6,
        format!(
            "1e3 bps: DCF {:.0} bps, Token-DCF {:.0} bps, gap {:.2}% (need <= 5%); 1e8 bps: ratio {r:.3} (need >= 1.6)",
            dcf_lo.average.throughput_bps,
            tok_lo.average.throughput_bps,
            gap * 100.0
        ),
    )
}

fn criterion_8() -> Outcome {
    let cfg = scenario(Protocol::Dcf, 1, 150.0, TrafficSpec::full_buffer(500));
    let row = run_scenario(&cfg, "two-station", "1").expect("scenario runs");
    let p = MacParams::default();
    let t_data = p.airtime(&MacFrame::data(0, 1, 500, 0), false).0 as f64;
    let mean_slots = f64::from(p.cw_min) / 2.0;
    let cycle = p.difs.0 as f64
        + mean_slots * p.slot.0 as f64
        + t_data
        + p.sifs.0 as f64
        + p.ack_airtime().0 as f64;
    let model = 500.0 * 8.0 / (cycle * 1e-6);
    let err = (row.average.throughput_bps - model).abs() / model;
    outcome(
        err <= 0.02,
        format!(
            "measured {:.0} bps, model {model:.0} bps, error {:.3}% (need <= 2%)",
            row.average.throughput_bps,
            err * 100.0
        ),
    )
}

fn criterion_9() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut events = 0u64;
    for case in 0..1_000_000u32 {
        let me: StationId = rng.gen_range(0..30);
        let pool: StationId = rng.gen_range(1..=30);
        let len = rng.gen_range(1..=80);
        let mut st = SchedulerState::new(me, TokenParams::default(), Policy::Lqf);
        let mut model = AdaptModel::new(me);
        for _ in 0..len {
            if rng.gen_ratio(1, 50) {
                st.period_reset();
                model.reset();
            } else {
                let src = rng.gen_range(0..pool);
                st.adapt(src);
                model.adapt(src);
            }
            events += 1;
            if let Err(e) = agree(&model, &st) {
                return outcome(false, format!("sequence {case}: {e}"));
            }
        }
    }
    outcome(
        true,
        format!("1000000 sequences, {events} events: state identical, p within [0, 0.9]"),
    )
}

fn replay_violations(cfg: &ScenarioConfig, log: &[TxRecord]) -> usize {
    let (topo, _) = generate_topology(cfg, 0).unwrap();
    let n = topo.len() as StationId;
    let mut bad = 0;
    for (i, tx) in log.iter().enumerate() {
        for r in (0..n).filter(|&r| r != tx.src) {
            let clean = log.iter().enumerate().all(|(j, o)| {
                j == i
                    || o.end <= tx.start
                    || o.start >= tx.end
                    || !(o.src == r || topo.link_geometry(o.src, r).unwrap().in_cs_range)
            });
            let expected = topo.link_geometry(tx.src, r).unwrap().in_tx_range && clean;
            if expected != tx.delivered.contains(&r) {
                bad += 1;
            }
        }
    }
    bad
}

fn criterion_10() -> Outcome {
    let logged = RunOptions {
        trace_events: true,
        log_transmissions: true,
    };
    let mut failures = Vec::new();

    // Determinism.
    let cfg = scenario(Protocol::TokenDcf, 20, 150.0, TrafficSpec::full_buffer(500));
    let mut short = cfg.clone();
    short.duration_s = 2.0;
    let a = run_once(&short, 0, logged).unwrap().output;
    let b = run_once(&short, 0, logged).unwrap().output;
    if a.trace != b.trace || a.tx_log != b.tx_log || a.record != b.record {
        failures.push("rerun differs");
    }

    // Conservation, exclusivity and SIFS gaps over full-length runs.
    let mut checks = (0, 0);
    for proto in Protocol::ALL {
        for traffic in [
            TrafficSpec::full_buffer(500),
            TrafficSpec::pareto(1500, 1e7),
        ] {
            let mut c = cfg.clone();
            c.protocol = proto;
            c.traffic = traffic;
            let out = run_once(&c, 1, RunOptions::default()).unwrap().output;
            let conserved = out.conservation.iter().all(|(k, q)| {
                k.arrivals == k.acked + k.dropped_buffer + k.dropped_retry + *q as u64
            });
            if !conserved {
                failures.push("packet conservation");
            }
            let d = out.diagnostics;
            if d.exclusivity_violations > 0 {
                failures.push("more than one privileged station");
            }
            if d.sifs_gap_violations > 0 {
                failures.push("privileged gap differs from SIFS");
            }
            checks.0 += d.exclusivity_checks;
            checks.1 += d.sifs_gap_checks;
        }
    }
    if checks.0 == 0 || checks.1 == 0 {
        failures.push("token diagnostics never exercised");
    }

    // p = 0 equivalence.
    for area in [150.0, 800.0] {
        let dcf = {
            let mut c = scenario(Protocol::Dcf, 20, area, TrafficSpec::full_buffer(500));
            c.duration_s = 2.0;
            c
        };
        let mut tok = dcf.clone();
        tok.protocol = Protocol::TokenDcf;
        tok.token.max_num = u32::MAX;
        tok.mac.token_header_bytes = 0;
        let x = run_once(&dcf, 0, logged).unwrap().output;
        let y = run_once(&tok, 0, logged).unwrap().output;
        if x.tx_log != y.tx_log {
            failures.push("p = 0 trace differs from DCF");
        }
    }

    // Overlap-corruption replay.
    let mut multi = scenario(
        Protocol::TokenDcf,
        20,
        800.0,
        TrafficSpec::full_buffer(1500),
    );
    multi.duration_s = 0.2;
    let mut replayed = 0;
    for proto in Protocol::ALL {
        multi.protocol = proto;
        let log = run_once(&multi, 0, logged).unwrap().output.tx_log.unwrap();
        replayed += log.len();
        if replay_violations(&multi, &log) > 0 {
            failures.push("delivery contradicts overlap replay");
        }
    }

    outcome(
        failures.is_empty(),
        if failures.is_empty() {
            format!(
                "determinism, conservation, exclusivity ({} scans), SIFS gaps ({} checks), p = 0 equivalence, replay of {replayed} frames",
                checks.0, checks.1
            )
        } else {
            failures.join("; ")
        },
    )
}

fn main() -> ExitCode {
    // Criterion 1 is timed on its own scenario, then reused by the sweep.
    let started = Instant::now();
    let c1 = pair(20, 150.0, TrafficSpec::full_buffer(500));
    let elapsed = started.elapsed();
    let sweep: Vec<(ResultRow, ResultRow)> = STATIONS
        .iter()
        .map(|&n| {
            if n == 20 {
                c1.clone()
            } else {
                pair(n, 150.0, TrafficSpec::full_buffer(500))
            }
        })
        .collect();

    let results = [
        criterion_1(&sweep, elapsed),
        criterion_2(&sweep),
        criterion_3(&sweep),
        criterion_4(&sweep),
        criterion_5(&sweep),
        criterion_6(),
        criterion_7(),
        criterion_8(),
        criterion_9(),
        criterion_10(),
    ];
    let mut failed = 0;
    for (i, r) in results.iter().enumerate() {
        println!(
            "criterion {:>2}: {} {}",
            i + 1,
            if r.pass { "PASS" } else { "FAIL" },
            r.detail
        );
        failed += usize::from(!r.pass);
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        results.len() - failed
    );
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
