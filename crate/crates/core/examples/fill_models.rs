//! The order ladder for a buy at bid 1999 / ask 2001: per-candidate cost,
//! fill probability and the fill covariance.

use mpc_execution::models::{build_ladder, fill_covariance, trading_cost, FillProbability, LinearFillModel, Quote};
use mpc_execution::orderbook::Side;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let quote = Quote {
        bid: Some(1999),
        ask: Some(2001),
    };
    let ladder = build_ladder(Side::Buy, &quote, 6)?;
    let pi = LinearFillModel::default().probabilities(&ladder);
    let cost = trading_cost(&ladder, Side::Buy, &quote)?;
    println!("{:>3} {:>8} {:>7} {:>6} {:>6}", "i", "kind", "price", "cost", "pi");
    for ((c, p), k) in ladder.iter().zip(&pi).zip(&cost) {
        let price = c.price.map_or("-".to_string(), |p| p.to_string());
        println!("{:>3} {:>8?} {price:>7} {k:>6.2} {p:>6.3}", c.index, c.kind);
    }
    println!("covariance:{:.4}", fill_covariance(&pi));
    Ok(())
}
