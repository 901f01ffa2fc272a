//! Reproducible synthetic L3 streams.
//!
//! The mid follows a random walk on the tick grid, stepping at Poisson times.
//! Each step is a trinomial move (or a short run of them) whose mean and
//! variance match the configured drift and volatility exactly. The spread is
//! held constant: an up-move executes the whole ask touch and a new bid level
//! appears one tick higher, a down-move does the mirror image. Between moves
//! both sides churn with adds, cancels, deletes and replaces, and small trades
//! hit the touch without clearing it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::orderbook::{BookEvent, Nanos, OrderBook, Price, Qty, Side};

use super::{MarketDataError, MarketSession};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticMarketConfig {
    pub seed: u64,
    pub duration_secs: f64,
    /// Starting mid, in ticks.
    pub initial_mid: f64,
    pub tick_size: f64,
    /// Book churn messages per second on each side.
    pub event_rate: f64,
    /// Standard deviation of one mid step, in ticks.
    pub volatility: f64,
    /// Expected mid drift, in ticks per hour.
    pub drift: f64,
    pub spread_ticks: Price,
    /// Target resting shares per price level.
    pub level_depth_mean: f64,
    pub num_levels: usize,
    pub orders_per_level: usize,
    /// Mean time between mid steps.
    pub mid_step_secs: f64,
    /// Touch trades per second (both sides together).
    pub trade_rate: f64,
}

impl Default for SyntheticMarketConfig {
    fn default() -> Self {
        SyntheticMarketConfig {
            seed: 0,
            duration_secs: 6.5 * 3600.0,
            initial_mid: 2000.0,
            tick_size: 0.01,
            event_rate: 1.0,
            volatility: 0.35,
            drift: 0.0,
            spread_ticks: 2,
            level_depth_mean: 400.0,
            num_levels: 20,
            orders_per_level: 4,
            mid_step_secs: 1.0,
            trade_rate: 0.5,
        }
    }
}

impl SyntheticMarketConfig {
    pub fn session_end_ns(&self) -> Nanos {
        (self.duration_secs * 1e9).round() as Nanos
    }

    /// Mean mid change per step, in ticks.
    pub fn step_mean(&self) -> f64 {
        self.drift * self.mid_step_secs / 3600.0
    }

    pub fn validate(&self) -> Result<(), MarketDataError> {
        let bad = |msg: &str| Err(MarketDataError::InvalidConfig(msg.to_string()));
        if !(self.event_rate > 0.0) {
            return bad("event_rate must be positive");
        }
        if !(self.duration_secs > 0.0) || !(self.mid_step_secs > 0.0) || !(self.trade_rate > 0.0) {
            return bad("duration, mid_step_secs and trade_rate must be positive");
        }
        if !(self.tick_size > 0.0) || !(self.volatility > 0.0) || !(self.level_depth_mean >= 1.0) {
            return bad("tick_size, volatility and level_depth_mean must be positive");
        }
        if self.num_levels < 2 || self.orders_per_level < 1 || self.spread_ticks < 1 {
            return bad("need num_levels >= 2, orders_per_level >= 1, spread_ticks >= 1");
        }
        if self.initial_bid() - (self.num_levels as Price) < 1 {
            return bad("initial_mid too low for the configured depth");
        }
        let (_, _, down) = self.lattice();
        if down < 0.0 || !self.drift.is_finite() {
            return bad("drift too large for the configured volatility");
        }
        Ok(())
    }

    fn initial_bid(&self) -> Price {
        (self.initial_mid - self.spread_ticks as f64 / 2.0).floor() as Price
    }

    /// Substeps per mid step and the per-substep up/down probabilities.
    fn lattice(&self) -> (usize, f64, f64) {
        let (mu, var) = (self.step_mean(), self.volatility * self.volatility);
        let k = (var + mu * mu).ceil().max(1.0) as usize;
        let (m, v) = (mu / k as f64, var / k as f64);
        let up = (v + m * m + m) / 2.0;
        let down = (v + m * m - m) / 2.0;
        (k, up, down)
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct GenerationStats {
    /// Churn messages on the bid and ask side.
    pub churn_events: [u64; 2],
    pub mid_steps: u64,
    pub trades: u64,
}

#[derive(Debug, Clone)]
pub struct GeneratedMarket {
    pub session: MarketSession,
    /// Mid in ticks at the start and after every mid step.
    pub mid_path: Vec<(Nanos, f64)>,
    pub stats: GenerationStats,
}

struct Generator<'a> {
    cfg: &'a SyntheticMarketConfig,
    rng: ChaCha8Rng,
    book: OrderBook,
    events: Vec<BookEvent>,
    next_id: u64,
}

impl Generator<'_> {
    fn emit(&mut self, ev: BookEvent) -> Result<(), MarketDataError> {
        self.book.apply(&ev)?;
        self.events.push(ev);
        Ok(())
    }

    fn order_size(&mut self) -> Qty {
        let mean = (self.cfg.level_depth_mean / self.cfg.orders_per_level as f64).max(1.0);
        let hi = (2.0 * mean - 1.0).round().max(1.0) as Qty;
        self.rng.random_range(1..=hi)
    }

    fn add(&mut self, ts: Nanos, side: Side, price: Price) -> Result<(), MarketDataError> {
        self.next_id += 1;
        let qty = self.order_size();
        self.emit(BookEvent::add(ts, self.next_id, side, price, qty))
    }

    fn fill_level(&mut self, ts: Nanos, side: Side, price: Price) -> Result<(), MarketDataError> {
        for _ in 0..self.cfg.orders_per_level {
            self.add(ts, side, price)?;
        }
        Ok(())
    }

    fn clear_level(&mut self, ts: Nanos, side: Side, price: Price, execute: bool) -> Result<(), MarketDataError> {
        let orders: Vec<(u64, Qty)> = self.book.level_orders(side, price).collect();
        for (id, qty) in orders {
            let ev = if execute {
                BookEvent::execute(ts, id, side, price, qty)
            } else {
                BookEvent::delete(ts, id, side, price)
            };
            self.emit(ev)?;
        }
        Ok(())
    }

    /// Keep exactly `num_levels` contiguous levels on `side`.
    fn normalize(&mut self, ts: Nanos, side: Side) -> Result<(), MarketDataError> {
        while self.book.num_levels(side) > self.cfg.num_levels {
            let deepest = self.book.depth(side).last().map(|(p, _)| p).expect("non-empty side");
            self.clear_level(ts, side, deepest, false)?;
        }
        while self.book.num_levels(side) < self.cfg.num_levels {
            let deepest = self.book.depth(side).last().map(|(p, _)| p).expect("non-empty side");
            let next = deepest - side.sign() as Price;
            if next < 1 {
                break;
            }
            self.fill_level(ts, side, next)?;
        }
        Ok(())
    }

    /// Move both touches one tick. The touch being walked away from is
    /// executed in full.
    fn tick_move(&mut self, ts: Nanos, up: bool) -> Result<(), MarketDataError> {
        let (bid, ask) = match (self.book.best_bid(), self.book.best_ask()) {
            (Some(b), Some(a)) => (b, a),
            _ => return Ok(()),
        };
        if up {
            self.clear_level(ts, Side::Sell, ask, true)?;
            self.fill_level(ts, Side::Buy, bid + 1)?;
        } else {
            if bid - (self.cfg.num_levels as Price) < 1 {
                return Ok(());
            }
            self.clear_level(ts, Side::Buy, bid, true)?;
            self.fill_level(ts, Side::Sell, ask - 1)?;
        }
        self.normalize(ts, Side::Buy)?;
        self.normalize(ts, Side::Sell)
    }

    fn churn(&mut self, ts: Nanos, side: Side) -> Result<(), MarketDataError> {
        let k = self.rng.random_range(0..self.book.num_levels(side));
        let Some((price, total)) = self.book.depth(side).nth(k) else {
            return Ok(());
        };
        let mean = self.cfg.level_depth_mean;
        if self.rng.random::<f64>() < mean / (mean + total as f64) {
            return self.add(ts, side, price);
        }
        let orders: Vec<(u64, Qty)> = self.book.level_orders(side, price).collect();
        let (id, qty) = orders[self.rng.random_range(0..orders.len())];
        let r = self.rng.random::<f64>();
        if r >= 0.8 {
            self.next_id += 1;
            let new_qty = self.order_size();
            return self.emit(BookEvent::replace(ts, id, side, price, self.next_id, price, new_qty));
        }
        if orders.len() > 1 && (r < 0.5 || qty == 1) {
            return self.emit(BookEvent::delete(ts, id, side, price));
        }
        if qty > 1 {
            let cut = self.rng.random_range(1..qty);
            return self.emit(BookEvent::cancel(ts, id, side, price, cut));
        }
        // lone one-share order: removing it would empty the level
        self.add(ts, side, price)
    }

    fn trade(&mut self, ts: Nanos) -> Result<bool, MarketDataError> {
        let resting = if self.rng.random::<bool>() { Side::Sell } else { Side::Buy };
        let Some(price) = self.book.best(resting) else {
            return Ok(false);
        };
        let total = self.book.level_quantity(resting, price);
        let Some((id, head)) = self.book.level_orders(resting, price).next() else {
            return Ok(false);
        };
        let max = head.min(total - 1);
        if max == 0 {
            return Ok(false);
        }
        let qty = self.rng.random_range(1..=max);
        self.emit(BookEvent::execute(ts, id, resting, price, qty))?;
        Ok(true)
    }
}

/// Generate one session. Deterministic in `cfg` (including the seed).
pub fn generate_market(cfg: &SyntheticMarketConfig) -> Result<GeneratedMarket, MarketDataError> {
    cfg.validate()?;
    let mut g = Generator {
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
        book: OrderBook::new(cfg.tick_size),
        events: Vec::new(),
        next_id: 0,
    };
    let bid = cfg.initial_bid();
    let ask = bid + cfg.spread_ticks;
    for level in 0..cfg.num_levels as Price {
        g.fill_level(0, Side::Buy, bid - level)?;
        g.fill_level(0, Side::Sell, ask + level)?;
    }

    let mut stats = GenerationStats::default();
    let mut mid_path = vec![(0, g.book.mid_ticks().expect("two-sided book"))];
    let (substeps, p_up, p_down) = cfg.lattice();
    let step_rate = 1.0 / cfg.mid_step_secs;
    let total_rate = step_rate + 2.0 * cfg.event_rate + cfg.trade_rate;
    let clock = Exp::new(total_rate).map_err(|e| MarketDataError::InvalidConfig(e.to_string()))?;
    let end = cfg.session_end_ns();
    let mut t = 0.0;
    loop {
        t += clock.sample(&mut g.rng);
        let ts = (t * 1e9) as Nanos;
        if ts >= end {
            break;
        }
        let pick = g.rng.random::<f64>() * total_rate;
        if pick < step_rate {
            for _ in 0..substeps {
                let u = g.rng.random::<f64>();
                if u < p_up {
                    g.tick_move(ts, true)?;
                } else if u < p_up + p_down {
                    g.tick_move(ts, false)?;
                }
            }
            stats.mid_steps += 1;
            mid_path.push((ts, g.book.mid_ticks().expect("two-sided book")));
        } else if pick < step_rate + cfg.event_rate {
            g.churn(ts, Side::Buy)?;
            stats.churn_events[0] += 1;
        } else if pick < step_rate + 2.0 * cfg.event_rate {
            g.churn(ts, Side::Sell)?;
            stats.churn_events[1] += 1;
        } else if g.trade(ts)? {
            stats.trades += 1;
        }
    }

    Ok(GeneratedMarket {
        session: MarketSession {
            tick_size: cfg.tick_size,
            session_end_ns: end,
            events: g.events,
        },
        mid_path,
        stats,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn short(seed: u64) -> SyntheticMarketConfig {
        SyntheticMarketConfig {
            seed,
            duration_secs: 600.0,
            ..Default::default()
        }
    }

    #[test]
    fn deterministic_by_seed() {
        let a = generate_market(&short(7)).unwrap();
        let b = generate_market(&short(7)).unwrap();
        let c = generate_market(&short(8)).unwrap();
        assert_eq!(a.session, b.session);
        assert_ne!(a.session, c.session);
    }

    #[test]
    fn stream_replays_cleanly_and_keeps_shape() {
        let cfg = short(3);
        let m = generate_market(&cfg).unwrap();
        let mut book = OrderBook::new(cfg.tick_size);
        for ev in &m.session.events {
            book.apply(ev).unwrap();
            assert!(book.check_invariants().is_ok());
        }
        assert_eq!(book.num_levels(Side::Buy), cfg.num_levels);
        assert_eq!(book.num_levels(Side::Sell), cfg.num_levels);
        assert_eq!(book.spread_ticks(), Some(cfg.spread_ticks));
        assert_eq!(book.mid_ticks(), Some(m.mid_path.last().unwrap().1));
    }

    #[test]
    fn zero_event_rate_is_rejected() {
        let cfg = SyntheticMarketConfig {
            event_rate: 0.0,
            ..short(1)
        };
        assert!(matches!(generate_market(&cfg), Err(MarketDataError::InvalidConfig(_))));
    }

    #[test]
    fn lattice_moments_are_exact() {
        for (vol, drift) in [(0.35, 0.0), (0.35, 200.0), (1.7, -900.0), (0.05, 0.0)] {
            let cfg = SyntheticMarketConfig {
                volatility: vol,
                drift,
                ..Default::default()
            };
            let (k, up, down) = cfg.lattice();
            let mean = k as f64 * (up - down);
            let m1 = up - down;
            let var = k as f64 * (up + down - m1 * m1);
            assert!((mean - cfg.step_mean()).abs() < 1e-12);
            assert!((var - vol * vol).abs() < 1e-12);
        }
    }
}
