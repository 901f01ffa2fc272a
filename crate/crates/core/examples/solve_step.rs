//! One decision step solved by the barrier method and, on a reduced
//! ladder, checked against the brute-force oracle.

use mpc_execution::models::{build_ladder, fill_covariance, trading_cost, FillProbability, LinearFillModel, Quote};
use mpc_execution::mpc::{oracle_solve, BarrierSolver, MpcParams, MpcProblem};
use mpc_execution::orderbook::Side;

fn problem(d: usize, q: f64, s_next: f64) -> Result<MpcProblem, Box<dyn std::error::Error>> {
    let quote = Quote {
        bid: Some(1999),
        ask: Some(2001),
    };
    let ladder = build_ladder(Side::Buy, &quote, d)?;
    let pi = LinearFillModel::default().probabilities(&ladder);
    let c = trading_cost(&ladder, Side::Buy, &quote)?;
    let mask = ladder.iter().map(|c| c.is_market()).collect();
    let sigma = fill_covariance(&pi);
    Ok(MpcProblem::build(c, pi, sigma, mask, q, s_next, 100.0, 0.5, &MpcParams::default())?)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut solver = BarrierSolver::default();
    // 8 behind schedule
    let p = problem(11, 20.0, 28.0)?;
    let s = solver.solve(&p)?;
    println!("d=11: u = {:.3?}", s.u);
    println!(
        "      m_hat {:.4}, v_hat {:.4}, objective {:.4}, {} newton steps",
        s.m_hat, s.v_hat, s.objective, s.iterations
    );
    println!("      max violation {:.1e}", p.violations(&s.u, s.slack).max());

    let p = problem(3, 20.0, 28.0)?;
    let s = solver.solve(&p)?;
    let o = oracle_solve(&p, 1e-3)?;
    println!("d=3:  barrier {:.6} at {:.4?}", s.objective, s.u);
    println!("      oracle  {:.6} at {:.4?}", o.objective, o.u);
    Ok(())
}
