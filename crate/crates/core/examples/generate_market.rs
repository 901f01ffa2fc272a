//! Generate a session, save it in both file formats and read it back.

use mpc_execution::marketdata::{generate_market, MarketSession, SyntheticMarketConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SyntheticMarketConfig {
        seed: 7,
        duration_secs: 1800.0,
        drift: 20.0,
        ..Default::default()
    };
    let m = generate_market(&cfg)?;
    println!(
        "{} events, {} mid steps, {} trades",
        m.session.events.len(),
        m.stats.mid_steps,
        m.stats.trades
    );
    let (t0, first) = m.mid_path[0];
    let (t1, last) = *m.mid_path.last().unwrap();
    println!("mid {first} ticks at {t0} ns -> {last} ticks at {t1} ns");

    let dir = std::env::temp_dir().join("mpcx-example");
    std::fs::create_dir_all(&dir)?;
    let bin = dir.join("session.l3e");
    let csv = dir.join("session.l3e.csv");
    m.session.save(&bin)?;
    m.session.save_csv(&csv)?;
    let back = MarketSession::load(&bin)?;
    let back_csv = MarketSession::load_csv(&csv, back.tick_size, back.session_end_ns)?;
    assert_eq!(back, m.session);
    assert_eq!(back_csv, m.session);
    println!("round trip ok: {} and {}", bin.display(), csv.display());
    Ok(())
}
