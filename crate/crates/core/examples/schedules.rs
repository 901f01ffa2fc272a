//! The three reference schedules for a parent of 100 over 78 steps.

use mpc_execution::marketdata::{accumulate_vwap, generate_market, SyntheticMarketConfig};
use mpc_execution::schedule::Schedule;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps = 78;
    let interval = 300_000_000_000;
    // a prior session supplies the volume profile
    let prior = generate_market(&SyntheticMarketConfig {
        seed: 99,
        ..Default::default()
    })?;
    let (_, profile) = accumulate_vwap(&prior.session.events, 0, interval, steps)?;

    let all = [
        Schedule::twap(100.0, steps)?,
        Schedule::vwap(100.0, &profile)?,
        Schedule::almgren_chriss(100.0, steps, 0.03)?,
    ];
    println!("{:>4} {:>8} {:>8} {:>8}", "t", "twap", "vwap", "ac");
    for t in (0..=steps).step_by(13) {
        print!("{t:>4}");
        for s in &all {
            print!(" {:>8.3}", s.at(t)?);
        }
        println!();
    }
    Ok(())
}
