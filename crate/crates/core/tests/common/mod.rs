#![allow(dead_code)]

use mpc_execution::models::fill_covariance;
use mpc_execution::mpc::{MpcParams, MpcProblem};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random but well-formed step problem with `d` candidates: one market
/// order followed by limits with descending fill probability and cost.
pub fn random_problem(seed: u64, d: usize) -> MpcProblem {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pi = vec![1.0];
    let mut c = vec![0.5];
    let mut p = 1.0;
    let mut cost = -0.5;
    for _ in 1..d {
        p *= rng.random_range(0.3..0.98);
        pi.push(p);
        c.push(cost);
        cost -= rng.random_range(0.1..0.8);
    }
    let q: f64 = rng.random_range(0.0..90.0);
    let s_next: f64 = (q + rng.random_range(-10.0f64..25.0)).clamp(0.0, 100.0);
    let rho_upper: f64 = rng.random_range(0.0..20.0);
    let params = MpcParams {
        gamma: 10f64.powf(rng.random_range(-2.0..2.0)),
        beta: 10f64.powf(rng.random_range(-1.5..1.0)),
        kappa: 50.0,
        // keep the current position inside the upper tube
        rho_upper: rho_upper.max(q - s_next),
        rho_lower: rng.random_range(0.0..20.0),
    };
    let xi = rng.random_range(-2.0..2.0);
    let mask = (0..d).map(|i| i == 0).collect();
    MpcProblem::build(c, pi.clone(), fill_covariance(&pi), mask, q, s_next, 100.0, xi, &params).unwrap()
}

use mpc_execution::orderbook::{BookEvent, Price, Qty, Side};
use std::collections::BTreeMap;

pub type Resting = BTreeMap<u64, (Side, Price, Qty)>;

/// Turn raw op codes into a valid public stream. Bids live in 900..=999 and
/// asks in 1001..=1100 so nothing can lock or cross. Also returns the
/// reference book as `id -> (side, price, qty)`.
pub fn valid_stream(ops: &[(u8, u32, u32)]) -> (Vec<BookEvent>, Resting) {
    let mut live = Resting::new();
    let mut events = Vec::new();
    let mut next_id = 1u64;
    for (k, &(op, a, b)) in ops.iter().enumerate() {
        let ts = k as u64 * 1000;
        let pick = (!live.is_empty()).then(|| *live.keys().nth(a as usize % live.len()).unwrap());
        match (op % 5, pick) {
            (0, _) | (_, None) => {
                let side = if a % 2 == 0 { Side::Buy } else { Side::Sell };
                let price = match side {
                    Side::Buy => 999 - (b % 100) as Price,
                    Side::Sell => 1001 + (b % 100) as Price,
                };
                let qty = 1 + (a / 2 % 200) as Qty;
                events.push(BookEvent::add(ts, next_id, side, price, qty));
                live.insert(next_id, (side, price, qty));
                next_id += 1;
            }
            (1, Some(id)) | (2, Some(id)) => {
                let (side, price, qty) = live[&id];
                let take = 1 + b as Qty % qty;
                events.push(if op % 5 == 1 {
                    BookEvent::execute(ts, id, side, price, take)
                } else {
                    BookEvent::cancel(ts, id, side, price, take)
                });
                if take == qty {
                    live.remove(&id);
                } else {
                    live.insert(id, (side, price, qty - take));
                }
            }
            (3, Some(id)) => {
                let (side, price, _) = live[&id];
                events.push(BookEvent::delete(ts, id, side, price));
                live.remove(&id);
            }
            (_, Some(id)) => {
                let (side, price, _) = live[&id];
                let new_price = match side {
                    Side::Buy => 999 - (b % 100) as Price,
                    Side::Sell => 1001 + (b % 100) as Price,
                };
                let qty = 1 + (b / 100 % 200) as Qty;
                events.push(BookEvent::replace(ts, id, side, price, next_id, new_price, qty));
                live.remove(&id);
                live.insert(next_id, (side, new_price, qty));
                next_id += 1;
            }
        }
    }
    (events, live)
}
