//! Crossing against MPC on paired synthetic episodes.

use mpc_execution::exec::PolicyKind;
use mpc_execution::harness::{compare, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.episodes.days = 10;
    let c = compare(&cfg, &[PolicyKind::Crossing, PolicyKind::Mpc, PolicyKind::MpcOracle])?;
    for r in &c.reports {
        println!(
            "{:<10} z_arrival {:>7.3}  z_vwap {:>7.3}  z_schedule {:>7.3}  eps std {:.3}",
            r.policy.name(),
            r.z_arrival.mean,
            r.z_vwap.mean,
            r.z_schedule.mean,
            r.deviation.std
        );
    }
    for row in &c.rows {
        println!(
            "{} vs {} on {}: {:?}% better, wins {:.0}%",
            row.policy,
            c.baseline,
            row.metric,
            row.improvement.map(|v| (v * 100.0).round() / 100.0),
            100.0 * row.win_rate
        );
    }
    Ok(())
}
