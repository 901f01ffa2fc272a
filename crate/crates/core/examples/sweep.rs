//! Realized deviation variance as the variance cap grows.

use mpc_execution::harness::{sweep, RunConfig, SweepParam};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut cfg = RunConfig::default();
    cfg.episodes.days = 8;
    let s = sweep(&cfg, SweepParam::Beta, &[0.5, 2.0, 10.0])?;
    println!("crossing z_schedule {:.3} bps", s.baseline.z_schedule.mean);
    for row in &s.rows {
        println!(
            "beta {:>4}: Var(eps) {:.3}  mean v_hat {:.3}  mean m_hat {:.3}  z_schedule {:.3} bps",
            row.value, row.var_eps, row.mean_v_hat, row.mean_m_hat, row.report.z_schedule.mean
        );
    }
    Ok(())
}
