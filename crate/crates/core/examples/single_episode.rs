//! Every policy on the same synthetic day, step by step.

use mpc_execution::exec::{run_episode, ExecConfig, MpcConfig, ParentOrder, PolicyKind};
use mpc_execution::marketdata::{generate_market, SyntheticMarketConfig};
use mpc_execution::metrics::EpisodeMetrics;
use mpc_execution::orderbook::Side;
use mpc_execution::schedule::Schedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let market = generate_market(&SyntheticMarketConfig::default())?;
    let parent = ParentOrder::new(Side::Buy);
    let sched = Schedule::twap(parent.quantity, parent.steps)?;
    for policy in [PolicyKind::Crossing, PolicyKind::Mpc, PolicyKind::MpcOracle] {
        let r = run_episode(policy, &market.session, &parent, &sched, &MpcConfig::default(), &ExecConfig::default())?;
        let z = EpisodeMetrics::of(&r);
        println!(
            "{:<10} {} shares, {} fills, completion {:.3}, z_arrival {:.2?} z_schedule {:.2?} bps",
            policy.name(),
            r.total_shares,
            r.fills.len(),
            r.completion,
            z.z_arrival,
            z.z_schedule
        );
        let eps: Vec<String> = r.epsilon.iter().step_by(13).map(|e| format!("{e:.2}")).collect();
        println!("           eps every 13 steps: {}", eps.join(" "));
    }
    Ok(())
}
