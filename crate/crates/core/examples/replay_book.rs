//! Replay a synthetic session into a bare order book and sample the top of
//! book once a minute.

use mpc_execution::marketdata::{generate_market, SyntheticMarketConfig};
use mpc_execution::orderbook::{OrderBook, Side};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let cfg = SyntheticMarketConfig {
        duration_secs: 600.0,
        ..Default::default()
    };
    let market = generate_market(&cfg)?;
    let session = &market.session;
    let mut book = OrderBook::new(session.tick_size);
    let minute = 60_000_000_000;
    let mut next = minute;
    for ev in &session.events {
        while ev.timestamp >= next {
            print_top(&book, next / minute);
            next += minute;
        }
        book.apply(ev)?;
    }
    print_top(&book, next / minute);
    println!(
        "{} events, {} resting orders, {} bid levels, {} ask levels",
        session.events.len(),
        book.num_orders(),
        book.num_levels(Side::Buy),
        book.num_levels(Side::Sell)
    );
    Ok(())
}

fn print_top(book: &OrderBook, minute: u64) {
    match (book.best_bid(), book.best_ask()) {
        (Some(b), Some(a)) => println!(
            "t={minute:>2}m  bid {b} x {}  ask {a} x {}  spread {}",
            book.level_quantity(Side::Buy, b),
            book.level_quantity(Side::Sell, a),
            a - b
        ),
        _ => println!("t={minute:>2}m  one-sided"),
    }
}
