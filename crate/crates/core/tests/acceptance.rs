//! End-to-end acceptance suite. Every criterion runs and prints one
//! PASS/FAIL line. The test fails if any criterion outside `KNOWN_RED` fails.

mod common;

use std::io::Write;
use std::time::Instant;

use mpc_execution::exec::{run_episode, ExecConfig, MpcConfig, ParentOrder, PolicyKind};
use mpc_execution::harness::{compare, sweep, RunConfig, SweepParam};
use mpc_execution::marketdata::codec::{read_csv, read_l3e, write_l3e};
use mpc_execution::marketdata::{
    encode_event, generate_market, parse_event, FileHeader, MarketDataError, MarketSession, SyntheticMarketConfig,
    VolumeProfile,
};
use mpc_execution::metrics::{improvement, Summary};
use mpc_execution::models::fill_covariance;
use mpc_execution::mpc::{grid_slack, oracle_solve, BarrierSolver};
use mpc_execution::orderbook::{BookEvent, Nanos, Side};
use mpc_execution::schedule::Schedule;
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Criteria expected to fail, with the reason. See the design notes.
const KNOWN_RED: &[(usize, &str)] = &[
    (1, "two published improvement cells differ from their own inputs by more than 0.15 points"),
    (5, "the per-step cap bounds the one-step fill variance, not the spread of planned deviations"),
];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn base_config(days: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.episodes.days = days;
    cfg.episodes.instruments = 1;
    cfg
}

// 1: improvement arithmetic on the published slippage table.
fn c1_improvement_table() -> Outcome {
    // (schedule, [crossing, mpc] for arrival, vwap, schedule price)
    let table2: [(&str, [(f64, f64); 3]); 3] = [
        ("vwap", [(19.59, 18.10), (6.75, 4.53), (6.12, 4.36)]),
        ("twap", [(19.15, 16.98), (6.75, 4.71), (6.83, 5.49)]),
        ("ac", [(21.70, 20.99), (13.21, 9.03), (17.22, 12.46)]),
    ];
    let table3: [[f64; 3]; 3] = [[8.23, 48.85, 40.37], [12.77, 43.14, 24.55], [3.37, 46.34, 38.20]];
    let mut worst: f64 = 0.0;
    let mut off = Vec::new();
    for ((name, cells), published) in table2.iter().zip(&table3) {
        for (k, &(base, mpc)) in cells.iter().enumerate() {
            let got = improvement(base, mpc).unwrap();
            let err = (got - published[k]).abs();
            worst = worst.max(err);
            if err > 0.15 {
                off.push(format!("{name}[{k}] {got:.3} vs {}", published[k]));
            }
        }
    }
    outcome(off.is_empty(), format!("worst cell error {worst:.3} pts; outside 0.15: {off:?}"))
}

fn enumerated_covariance(pi: &[f64]) -> DMatrix<f64> {
    let d = pi.len();
    let prob: Vec<f64> = (0..=d)
        .map(|k| {
            let upper = if k == 0 { 1.0 } else { pi[k - 1] };
            let lower = if k == d { 0.0 } else { pi[k] };
            upper - lower
        })
        .collect();
    let ind = |k: usize, i: usize| if i < k { 1.0 } else { 0.0 };
    let mean: Vec<f64> = (0..d).map(|i| (0..=d).map(|k| prob[k] * ind(k, i)).sum()).collect();
    DMatrix::from_fn(d, d, |i, j| {
        (0..=d).map(|k| prob[k] * (ind(k, i) - mean[i]) * (ind(k, j) - mean[j])).sum()
    })
}

// 2: covariance against enumeration of the nested outcome law.
fn c2_covariance() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let d = rng.random_range(1..=12);
        let mut pi: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..=1.0)).collect();
        pi.sort_by(|a, b| b.total_cmp(a));
        worst = worst.max((fill_covariance(&pi) - enumerated_covariance(&pi)).amax());
    }
    let mut pair_worst: f64 = 0.0;
    for _ in 0..100 {
        let a: f64 = rng.random_range(0.0..=1.0);
        let b: f64 = rng.random_range(0.0..=a);
        let s = fill_covariance(&[a, b]);
        pair_worst = pair_worst.max((s[(0, 1)] - (b - a * b)).abs()).max((s[(1, 0)] - (b - a * b)).abs());
    }
    outcome(
        worst <= 1e-12 && pair_worst <= 1e-15,
        format!("max error {worst:.2e} over 1000 vectors, pair form {pair_worst:.2e}"),
    )
}

// 3: barrier solver against the brute-force oracle.
fn c3_solver_vs_oracle() -> Outcome {
    const GRID: f64 = 1e-3;
    let mut solver = BarrierSolver::default();
    let mut worst_gap: f64 = f64::NEG_INFINITY;
    let mut worst_violation: f64 = 0.0;
    let mut bad = Vec::new();
    for seed in 0..50u64 {
        let p = common::random_problem(1000 + seed, seed as usize % 3 + 1);
        let s = solver.solve(&p).unwrap();
        let o = oracle_solve(&p, GRID).unwrap();
        let tol = 1e-6 * (1.0 + o.objective.abs()) + grid_slack(&p, &o.u, GRID);
        let gap = (s.objective - o.objective).abs() - tol;
        worst_gap = worst_gap.max(gap);
        let v = p.violations(&s.u, s.slack).max();
        worst_violation = worst_violation.max(v);
        if gap > 0.0 || v > 1e-8 {
            bad.push(seed);
        }
    }
    outcome(
        bad.is_empty(),
        format!("worst |obj gap| - tolerance {worst_gap:.2e}, worst violation {worst_violation:.2e}, failing seeds {bad:?}"),
    )
}

// 4 and 7 share one paired run; 7 reads the first 100 episodes.
fn c4_c7_compliance_and_crossing() -> (Outcome, Outcome) {
    let cfg = base_config(200);
    let c = compare(&cfg, &[PolicyKind::Crossing, PolicyKind::Mpc]).unwrap();
    let mpc = &c.runs[1];
    let worst = mpc.iter().map(|r| r.result.max_violation()).fold(0.0, f64::max);
    let c4 = outcome(
        mpc.len() >= 200 && worst <= 1e-8,
        format!("{} TWAP episodes, max violation {worst:.2e}", mpc.len()),
    );

    let mean = |p: usize| {
        Summary::of(&c.metrics[p][..100].iter().filter_map(|m| m.z_schedule).collect::<Vec<_>>()).mean
    };
    let (z_cross, z_mpc) = (mean(0), mean(1));
    let imp = improvement(z_cross, z_mpc).ok();
    let c7 = outcome(
        z_mpc < z_cross && imp.is_some_and(|v| v >= 20.0),
        format!("z_schedule crossing {z_cross:.3} bps, mpc {z_mpc:.3} bps, improvement {imp:.2?}%"),
    );
    (c4, c7)
}

/// Rank correlation of one with the sweep order, ties allowed.
fn spearman_is_one(xs: &[f64]) -> bool {
    xs.windows(2).all(|w| w[1] >= w[0])
}

// 5: realized deviation variance against the cap.
fn c5_beta() -> Outcome {
    let betas = [0.5, 1.0, 2.0, 5.0, 10.0];
    let s = sweep(&base_config(40), SweepParam::Beta, &betas).unwrap();
    let var: Vec<f64> = s.rows.iter().map(|r| r.var_eps).collect();
    let monotone = spearman_is_one(&var);
    let over: Vec<f64> = betas
        .iter()
        .zip(&var)
        .filter(|(&b, &v)| b <= 5.0 && v > 1.25 * b)
        .map(|(&b, _)| b)
        .collect();
    outcome(
        monotone && over.is_empty(),
        format!("Var(eps) {:?} at beta {betas:?}; monotone {monotone}; above 1.25 beta at {over:?}", rounded(&var)),
    )
}

// 6: planned deviation shrinks with the risk weight.
fn c6_gamma() -> Outcome {
    let gammas = [0.1, 1.0, 10.0, 100.0];
    let s = sweep(&base_config(40), SweepParam::Gamma, &gammas).unwrap();
    let m: Vec<f64> = s.rows.iter().map(|r| r.mean_m_hat.abs()).collect();
    outcome(
        m.windows(2).all(|w| w[1] <= w[0]),
        format!("|mean m_hat| {:?} at gamma {gammas:?}", rounded(&m)),
    )
}

// 8: hindsight rollout under adverse drift.
fn c8_oracle_rollout() -> Outcome {
    let mut cfg = base_config(100);
    cfg.episodes.adverse_drift = true;
    cfg.market.synthetic.drift = 10.0;
    let c = compare(&cfg, &[PolicyKind::Mpc, PolicyKind::MpcOracle]).unwrap();
    let row = c.rows.iter().find(|r| r.metric == "z_schedule_bps").unwrap();
    outcome(
        row.win_rate >= 0.7 && row.improvement.is_some_and(|v| v > 0.0),
        format!(
            "drift 10 ticks/h against the trader: mpc {:.3} bps, mpc-oracle {:.3} bps, improvement {:.2?}%, wins {:.0}%",
            row.baseline,
            row.value,
            row.improvement,
            100.0 * row.win_rate
        ),
    )
}

fn static_book(end: Nanos) -> MarketSession {
    let mut events = Vec::new();
    for k in 0..5 {
        events.push(BookEvent::add(0, 1 + k, Side::Buy, 1999 - k as i64, 1_000_000));
        events.push(BookEvent::add(0, 100 + k, Side::Sell, 2001 + k as i64, 1_000_000));
    }
    MarketSession {
        tick_size: 0.01,
        session_end_ns: end,
        events,
    }
}

// 9: crossing pays half the spread on a book that never moves.
fn c9_crossing_closed_form() -> Outcome {
    let sec: Nanos = 1_000_000_000;
    let want = 1e4 * 0.5 * 0.02 / 20.0;
    let exec = ExecConfig {
        latency_ns: 0,
        ..ExecConfig::default()
    };
    let mut worst: f64 = 0.0;
    for side in [Side::Buy, Side::Sell] {
        let parent = ParentOrder {
            interval_ns: sec,
            ..ParentOrder::new(side)
        };
        let sched = Schedule::twap(100.0, parent.steps).unwrap();
        let r = run_episode(PolicyKind::Crossing, &static_book(100 * sec), &parent, &sched, &MpcConfig::default(), &exec)
            .unwrap();
        let z = mpc_execution::metrics::EpisodeMetrics::of(&r).z_schedule.unwrap();
        worst = worst.max((z - want).abs() / want);
    }
    outcome(worst <= 1e-9, format!("half spread {want} bps, worst relative error {worst:.2e}"))
}

fn sinh_series(x: f64) -> f64 {
    let mut term = x;
    let mut sum = 0.0;
    let mut k = 1.0;
    while term.abs() > 1e-40 {
        sum += term;
        term *= x * x / ((k + 1.0) * (k + 2.0));
        k += 2.0;
    }
    sum
}

// 10: schedule boundaries, monotonicity and the AC midpoint.
fn c10_schedules() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut broken = 0;
    let ok = |s: &Schedule| {
        let p = s.path();
        p[0] == 0.0 && p[s.steps] == s.quantity && p.windows(2).all(|w| w[1] >= w[0])
    };
    for _ in 0..1000 {
        let q = rng.random_range(0.0..1000.0);
        let steps = rng.random_range(1..200);
        let psi = 10f64.powf(rng.random_range(-6.0..1.5));
        let mut acc = 0.0;
        let cumulative: Vec<f64> = std::iter::once(0.0)
            .chain((0..steps).map(|_| {
                acc += if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..5.0) };
                acc
            }))
            .collect();
        let profile = VolumeProfile {
            boundaries: (0..=steps as u64).collect(),
            cumulative,
        };
        let mut all = vec![
            Schedule::twap(q, steps).unwrap(),
            Schedule::almgren_chriss(q, steps, psi).unwrap(),
        ];
        if acc > 0.0 {
            all.push(Schedule::vwap(q, &profile).unwrap());
        }
        broken += all.iter().filter(|s| !ok(s)).count();
    }
    let want = 100.0 * (1.0 - sinh_series(0.5) / sinh_series(1.0));
    let mut mid_err: f64 = 0.0;
    for steps in [2, 10, 78, 390] {
        let s = Schedule::almgren_chriss(100.0, steps, 1.0 / steps as f64).unwrap();
        mid_err = mid_err.max((s.at(steps / 2).unwrap() - want).abs());
    }
    outcome(
        broken == 0 && mid_err <= 1e-12,
        format!("{broken} broken schedules in 1000 cases, AC midpoint error {mid_err:.2e}"),
    )
}

fn random_record(rng: &mut ChaCha8Rng) -> BookEvent {
    let ts = rng.random::<u64>();
    let id = rng.random::<u64>();
    let side = if rng.random_bool(0.5) { Side::Buy } else { Side::Sell };
    let price = rng.random_range(1..i64::MAX);
    let qty = rng.random_range(1..=u64::MAX);
    match rng.random_range(0..5) {
        0 => BookEvent::add(ts, id, side, price, qty),
        1 => BookEvent::execute(ts, id, side, rng.random(), qty),
        2 => BookEvent::cancel(ts, id, side, rng.random(), qty),
        3 => BookEvent::delete(ts, id, side, rng.random()),
        _ => BookEvent::replace(ts, id, side, rng.random(), rng.random(), price, qty),
    }
}

// 11: binary records round trip; bad input is rejected with the right error.
fn c11_parser() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let events: Vec<BookEvent> = (0..1_000_000).map(|_| random_record(&mut rng)).collect();
    let header = FileHeader {
        tick_size: 0.01,
        session_end_ns: u64::MAX,
    };
    let mut mismatches = events
        .iter()
        .filter(|ev| {
            let bytes = encode_event(ev);
            parse_event(&bytes).map_or(true, |back| back != **ev || encode_event(&back) != bytes)
        })
        .count();
    let mut file = Vec::new();
    write_l3e(&mut file, &header, &events).unwrap();
    match read_l3e(&file[..]) {
        Ok((h, back)) if h == header && back == events => {}
        _ => mismatches += 1,
    }

    let good = encode_event(&BookEvent::add(1, 2, Side::Buy, 100, 5));
    let with = |at: usize, byte: u8| {
        let mut b = good;
        b[at] = byte;
        parse_event(&b)
    };
    let mut typed = vec![
        (with(0, b'Z').err(), MarketDataError::UnknownKind(b'Z')),
        (with(17, b'Q').err(), MarketDataError::UnknownSide(b'Q')),
        (with(26, 0).err(), MarketDataError::ZeroQuantity),
        (with(34, 9).err(), MarketDataError::UnexpectedReplaceFields),
        (
            parse_event(&good[..57]).err(),
            MarketDataError::TruncatedRecord {
                expected: 58,
                got: 57,
            },
        ),
        (
            parse_event(&encode_event(&BookEvent::add(1, 2, Side::Buy, 0, 5))).err(),
            MarketDataError::NonPositivePrice(0),
        ),
        (read_l3e(&b"NOPE"[..]).err(), MarketDataError::BadHeader("file shorter than header")),
        (
            read_l3e(&file[..file.len() - 1]).err(),
            MarketDataError::TruncatedRecord {
                expected: 58,
                got: 57,
            },
        ),
    ];
    let text = "kind,ts,order_id,side,price,qty,new_order_id,new_price,new_qty\nA,0,1,B,100,5,0,0,0\nA,zz,2,B,100,5,0,0,0\n";
    typed.push((read_csv(text.as_bytes()).err(), MarketDataError::CsvField { line: 3 }));
    let mut bad_magic = file[..24].to_vec();
    bad_magic[0] = b'X';
    typed.push((read_l3e(&bad_magic[..]).err(), MarketDataError::BadHeader("bad magic")));
    let wrong = typed.iter().filter(|(got, want)| got.as_ref() != Some(want)).count();
    outcome(
        mismatches == 0 && wrong == 0,
        format!("{mismatches} round-trip mismatches in 1e6 records, {wrong} of {} malformed cases mistyped", typed.len()),
    )
}

// 12: solve time at full ladder size and a full-length episode.
fn c12_performance() -> Outcome {
    let mut solver = BarrierSolver::default();
    let problems: Vec<_> = (0..500).map(|s| common::random_problem(5000 + s, 11)).collect();
    let started = Instant::now();
    for p in &problems {
        solver.solve(p).unwrap();
    }
    let mean_ms = started.elapsed().as_secs_f64() * 1e3 / problems.len() as f64;

    let market = generate_market(&SyntheticMarketConfig::default()).unwrap();
    let parent = ParentOrder::new(Side::Buy);
    let sched = Schedule::twap(100.0, parent.steps).unwrap();
    let started = Instant::now();
    let r = run_episode(
        PolicyKind::Mpc,
        &market.session,
        &parent,
        &sched,
        &MpcConfig::default(),
        &ExecConfig::default(),
    )
    .unwrap();
    let episode_s = started.elapsed().as_secs_f64();
    let in_episode_ms = r.steps.iter().map(|s| s.solve_ns as f64).sum::<f64>() / r.steps.len() as f64 / 1e6;
    outcome(
        mean_ms <= 10.0 && in_episode_ms <= 10.0 && episode_s <= 2.0,
        format!("mean solve {mean_ms:.3} ms (in episode {in_episode_ms:.3} ms), 78-step episode {episode_s:.3} s"),
    )
}

fn rounded(xs: &[f64]) -> Vec<f64> {
    xs.iter().map(|x| (x * 1e4).round() / 1e4).collect()
}

#[test]
fn acceptance() {
    let mut results: Vec<(usize, &str, Outcome)> = vec![
        (1, "improvement table arithmetic", c1_improvement_table()),
        (2, "covariance vs enumeration", c2_covariance()),
        (3, "solver vs oracle", c3_solver_vs_oracle()),
    ];
    let (c4, c7) = c4_c7_compliance_and_crossing();
    results.push((4, "constraint compliance in episodes", c4));
    results.push((5, "beta calibration", c5_beta()));
    results.push((6, "gamma clustering", c6_gamma()));
    results.push((7, "mpc beats crossing", c7));
    results.push((8, "oracle rollout dominance", c8_oracle_rollout()));
    results.push((9, "crossing closed form", c9_crossing_closed_form()));
    results.push((10, "schedule boundaries and monotonicity", c10_schedules()));
    results.push((11, "parser round trip", c11_parser()));
    results.push((12, "performance budget", c12_performance()));

    // Written straight to stderr so the lines show without --nocapture.
    let mut err = std::io::stderr().lock();
    let mut unexpected = Vec::new();
    for (id, name, o) in &results {
        let verdict = if o.pass { "PASS" } else { "FAIL" };
        let _ = writeln!(err, "{verdict} criterion {id:>2} {name}: {}", o.detail);
        let known = KNOWN_RED.iter().find(|(k, _)| k == id);
        match (o.pass, known) {
            (false, Some((_, why))) => {
                let _ = writeln!(err, "     known red: {why}");
            }
            (false, None) => unexpected.push(*id),
            (true, _) => {}
        }
    }
    assert!(unexpected.is_empty(), "criteria failed unexpectedly: {unexpected:?}");
}
