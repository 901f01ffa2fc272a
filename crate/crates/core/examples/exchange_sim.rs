//! A resting limit order in the simulator: queue position, latency and the
//! fill that arrives when the market trades through it.

use mpc_execution::orderbook::{BookEvent, ExchangeSim, Side, SimConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let ms = 1_000_000;
    let mut sim = ExchangeSim::new(0.01, SimConfig::default());
    sim.process(&BookEvent::add(0, 1, Side::Buy, 999, 300))?;
    sim.process(&BookEvent::add(0, 2, Side::Sell, 1001, 300))?;

    // joins the bid behind 300 shares once the latency has passed
    let h = sim.submit_limit(Side::Buy, 999, 100, 0).expect("non-zero order");
    sim.advance_clock(5 * ms);
    println!("after 5 ms: pending {}", sim.is_pending(h));
    sim.advance_clock(20 * ms);
    println!("after 20 ms: pending {}, resting {:?}", sim.is_pending(h), sim.order(h));

    // the 300 ahead of us trade away, then a seller hits our level for 50
    sim.process(&BookEvent::execute(30 * ms, 1, Side::Buy, 999, 300))?;
    sim.process(&BookEvent::add(31 * ms, 3, Side::Sell, 999, 50))?;
    for f in sim.fills() {
        println!("fill {} @ {} at {} ns", f.quantity, f.price, f.timestamp);
    }
    println!("cancelled {} unfilled", sim.cancel_all());
    Ok(())
}
