//! L3 limit order book reconstruction and shadow-order fill simulation.
//!
//! [`OrderBook`] replays a public add/execute/cancel/delete/replace stream and
//! keeps a FIFO queue per price level. [`ExchangeSim`] layers our own orders
//! on top of it: they see the book after a configurable latency, take
//! liquidity when marketable and otherwise wait in the queue, but never alter
//! the public stream.

mod sim;
mod tracked;

pub use sim::{ExchangeSim, OrderHandle, SimConfig, SimFill, DEFAULT_LATENCY_NS};
pub use tracked::{FillRule, TrackedOrder};

use std::collections::{BTreeMap, HashMap, VecDeque};

use thiserror::Error;

/// Price in integer ticks.
pub type Price = i64;
/// Quantity in shares.
pub type Qty = u64;
/// Nanoseconds since session open.
pub type Nanos = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Side {
    Buy,
    Sell,
}

impl Side {
    /// Side multiplier: +1 for buys, -1 for sells.
    pub fn sign(self) -> f64 {
        match self {
            Side::Buy => 1.0,
            Side::Sell => -1.0,
        }
    }

    pub fn opposite(self) -> Side {
        match self {
            Side::Buy => Side::Sell,
            Side::Sell => Side::Buy,
        }
    }

    /// True if `a` is a strictly better (more aggressive) price than `b` for this side.
    pub fn more_aggressive(self, a: Price, b: Price) -> bool {
        match self {
            Side::Buy => a > b,
            Side::Sell => a < b,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum EventKind {
    Add,
    Execute,
    Cancel,
    Delete,
    Replace,
}

/// One L3 market-data message.
///
/// Every kind carries the side and price of the order it refers to. The
/// `new_*` fields are only meaningful for [`EventKind::Replace`] and are zero
/// otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BookEvent {
    pub timestamp: Nanos,
    pub kind: EventKind,
    pub order_id: u64,
    pub side: Side,
    pub price: Price,
    pub quantity: Qty,
    pub new_order_id: u64,
    pub new_price: Price,
    pub new_quantity: Qty,
}

impl BookEvent {
    fn plain(kind: EventKind, timestamp: Nanos, order_id: u64, side: Side, price: Price, quantity: Qty) -> Self {
        BookEvent {
            timestamp,
            kind,
            order_id,
            side,
            price,
            quantity,
            new_order_id: 0,
            new_price: 0,
            new_quantity: 0,
        }
    }

    pub fn add(timestamp: Nanos, order_id: u64, side: Side, price: Price, quantity: Qty) -> Self {
        Self::plain(EventKind::Add, timestamp, order_id, side, price, quantity)
    }

    pub fn execute(timestamp: Nanos, order_id: u64, side: Side, price: Price, quantity: Qty) -> Self {
        Self::plain(EventKind::Execute, timestamp, order_id, side, price, quantity)
    }

    pub fn cancel(timestamp: Nanos, order_id: u64, side: Side, price: Price, quantity: Qty) -> Self {
        Self::plain(EventKind::Cancel, timestamp, order_id, side, price, quantity)
    }

    pub fn delete(timestamp: Nanos, order_id: u64, side: Side, price: Price) -> Self {
        Self::plain(EventKind::Delete, timestamp, order_id, side, price, 0)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn replace(
        timestamp: Nanos,
        order_id: u64,
        side: Side,
        price: Price,
        new_order_id: u64,
        new_price: Price,
        new_quantity: Qty,
    ) -> Self {
        BookEvent {
            timestamp,
            kind: EventKind::Replace,
            order_id,
            side,
            price,
            quantity: 0,
            new_order_id,
            new_price,
            new_quantity,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum BookError {
    #[error("unknown order id {0}")]
    UnknownOrderId(u64),
    #[error("duplicate order id {0}")]
    DuplicateOrderId(u64),
    #[error("event at {timestamp} would lock or cross the book (bid {bid:?}, ask {ask:?})")]
    CrossedBookEvent {
        timestamp: Nanos,
        bid: Option<Price>,
        ask: Option<Price>,
    },
    #[error("timestamp {got} precedes last applied timestamp {last}")]
    NonMonotoneTimestamp { last: Nanos, got: Nanos },
    #[error("order {0}: event side/price does not match the resting order")]
    OrderMismatch(u64),
    #[error("order {order_id}: quantity {requested} exceeds remaining {remaining}")]
    QuantityExceedsRemaining {
        order_id: u64,
        requested: Qty,
        remaining: Qty,
    },
    #[error("zero quantity on {0:?}")]
    ZeroQuantity(EventKind),
    #[error("non-positive price {0}")]
    NonPositivePrice(Price),
    #[error("order is not active")]
    InactiveOrder,
}

/// What an applied event did to the book, for downstream fill tracking.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BookChange {
    Added {
        side: Side,
        price: Price,
        order_id: u64,
        quantity: Qty,
    },
    Executed {
        side: Side,
        price: Price,
        order_id: u64,
        quantity: Qty,
        /// Whether the order left the book.
        removed: bool,
    },
    Removed {
        side: Side,
        price: Price,
        order_id: u64,
        quantity: Qty,
        removed: bool,
    },
    Replaced {
        side: Side,
        old_price: Price,
        old_order_id: u64,
        old_quantity: Qty,
        new_price: Price,
        new_order_id: u64,
        new_quantity: Qty,
    },
}

#[derive(Debug, Clone, Default)]
pub(crate) struct Level {
    pub(crate) queue: VecDeque<(u64, Qty)>,
    pub(crate) total: Qty,
}

#[derive(Debug, Clone, Copy)]
struct Locator {
    side: Side,
    price: Price,
}

/// Two-sided price-level book with FIFO queues.
#[derive(Debug, Clone)]
pub struct OrderBook {
    bids: BTreeMap<Price, Level>,
    asks: BTreeMap<Price, Level>,
    orders: HashMap<u64, Locator>,
    tick_size: f64,
    last_timestamp: Nanos,
}

impl OrderBook {
    pub fn new(tick_size: f64) -> Self {
        OrderBook {
            bids: BTreeMap::new(),
            asks: BTreeMap::new(),
            orders: HashMap::new(),
            tick_size,
            last_timestamp: 0,
        }
    }

    pub fn tick_size(&self) -> f64 {
        self.tick_size
    }

    pub fn last_timestamp(&self) -> Nanos {
        self.last_timestamp
    }

    pub fn best_bid(&self) -> Option<Price> {
        self.bids.keys().next_back().copied()
    }

    pub fn best_ask(&self) -> Option<Price> {
        self.asks.keys().next().copied()
    }

    pub fn best(&self, side: Side) -> Option<Price> {
        match side {
            Side::Buy => self.best_bid(),
            Side::Sell => self.best_ask(),
        }
    }

    /// Mid price in ticks; `None` unless both sides are quoted.
    pub fn mid_ticks(&self) -> Option<f64> {
        Some((self.best_bid()? + self.best_ask()?) as f64 / 2.0)
    }

    pub fn spread_ticks(&self) -> Option<Price> {
        Some(self.best_ask()? - self.best_bid()?)
    }

    /// Total resting quantity at a price on one side.
    pub fn level_quantity(&self, side: Side, price: Price) -> Qty {
        self.side(side).get(&price).map_or(0, |l| l.total)
    }

    /// Resting orders at a level in queue order.
    pub fn level_orders(&self, side: Side, price: Price) -> impl Iterator<Item = (u64, Qty)> + '_ {
        self.side(side)
            .get(&price)
            .into_iter()
            .flat_map(|l| l.queue.iter().copied())
    }

    /// Price levels on one side from the touch outward, with total quantity.
    pub fn depth(&self, side: Side) -> Box<dyn Iterator<Item = (Price, Qty)> + '_> {
        match side {
            Side::Buy => Box::new(self.bids.iter().rev().map(|(p, l)| (*p, l.total))),
            Side::Sell => Box::new(self.asks.iter().map(|(p, l)| (*p, l.total))),
        }
    }

    pub fn num_levels(&self, side: Side) -> usize {
        self.side(side).len()
    }

    pub fn num_orders(&self) -> usize {
        self.orders.len()
    }

    pub fn contains_order(&self, order_id: u64) -> bool {
        self.orders.contains_key(&order_id)
    }

    /// Remaining quantity of a resting order.
    pub fn order_quantity(&self, order_id: u64) -> Option<Qty> {
        let loc = self.orders.get(&order_id)?;
        self.side(loc.side)
            .get(&loc.price)?
            .queue
            .iter()
            .find(|(id, _)| *id == order_id)
            .map(|(_, q)| *q)
    }

    /// Levels of `side` from the touch outward (raw access for matching walks).
    pub(crate) fn levels_from_touch(&self, side: Side) -> Box<dyn Iterator<Item = (Price, &Level)> + '_> {
        match side {
            Side::Buy => Box::new(self.bids.iter().rev().map(|(p, l)| (*p, l))),
            Side::Sell => Box::new(self.asks.iter().map(|(p, l)| (*p, l))),
        }
    }

    fn side(&self, side: Side) -> &BTreeMap<Price, Level> {
        match side {
            Side::Buy => &self.bids,
            Side::Sell => &self.asks,
        }
    }

    fn side_mut(&mut self, side: Side) -> &mut BTreeMap<Price, Level> {
        match side {
            Side::Buy => &mut self.bids,
            Side::Sell => &mut self.asks,
        }
    }

    fn would_cross(&self, side: Side, price: Price) -> bool {
        match side {
            Side::Buy => self.best_ask().is_some_and(|a| price >= a),
            Side::Sell => self.best_bid().is_some_and(|b| price <= b),
        }
    }

    fn crossed_error(&self, timestamp: Nanos) -> BookError {
        BookError::CrossedBookEvent {
            timestamp,
            bid: self.best_bid(),
            ask: self.best_ask(),
        }
    }

    fn locate(&self, ev: &BookEvent) -> Result<Locator, BookError> {
        let loc = *self
            .orders
            .get(&ev.order_id)
            .ok_or(BookError::UnknownOrderId(ev.order_id))?;
        if loc.side != ev.side || loc.price != ev.price {
            return Err(BookError::OrderMismatch(ev.order_id));
        }
        Ok(loc)
    }

    fn insert(&mut self, order_id: u64, side: Side, price: Price, quantity: Qty) {
        let level = self.side_mut(side).entry(price).or_default();
        level.queue.push_back((order_id, quantity));
        level.total += quantity;
        self.orders.insert(order_id, Locator { side, price });
    }

    /// Take `quantity` (or everything, if `None`) from a resting order.
    /// Returns (taken, order_removed).
    fn reduce(&mut self, order_id: u64, loc: Locator, quantity: Option<Qty>) -> Result<(Qty, bool), BookError> {
        let levels = self.side_mut(loc.side);
        let level = levels
            .get_mut(&loc.price)
            .ok_or(BookError::UnknownOrderId(order_id))?;
        let pos = level
            .queue
            .iter()
            .position(|(id, _)| *id == order_id)
            .ok_or(BookError::UnknownOrderId(order_id))?;
        let remaining = level.queue[pos].1;
        let take = quantity.unwrap_or(remaining);
        if take > remaining {
            return Err(BookError::QuantityExceedsRemaining {
                order_id,
                requested: take,
                remaining,
            });
        }
        level.total -= take;
        let removed = take == remaining;
        if removed {
            level.queue.remove(pos);
        } else {
            level.queue[pos].1 -= take;
        }
        if level.queue.is_empty() {
            levels.remove(&loc.price);
        }
        if removed {
            self.orders.remove(&order_id);
        }
        Ok((take, removed))
    }

    /// Apply one public market-data event.
    ///
    /// Malformed input fails fast and leaves the book untouched.
    pub fn apply(&mut self, ev: &BookEvent) -> Result<BookChange, BookError> {
        if ev.timestamp < self.last_timestamp {
            return Err(BookError::NonMonotoneTimestamp {
                last: self.last_timestamp,
                got: ev.timestamp,
            });
        }
        let change = match ev.kind {
            EventKind::Add => {
                if ev.quantity == 0 {
                    return Err(BookError::ZeroQuantity(ev.kind));
                }
                if ev.price <= 0 {
                    return Err(BookError::NonPositivePrice(ev.price));
                }
                if self.orders.contains_key(&ev.order_id) {
                    return Err(BookError::DuplicateOrderId(ev.order_id));
                }
                if self.would_cross(ev.side, ev.price) {
                    return Err(self.crossed_error(ev.timestamp));
                }
                self.insert(ev.order_id, ev.side, ev.price, ev.quantity);
                BookChange::Added {
                    side: ev.side,
                    price: ev.price,
                    order_id: ev.order_id,
                    quantity: ev.quantity,
                }
            }
            EventKind::Execute | EventKind::Cancel => {
                if ev.quantity == 0 {
                    return Err(BookError::ZeroQuantity(ev.kind));
                }
                let loc = self.locate(ev)?;
                let (quantity, removed) = self.reduce(ev.order_id, loc, Some(ev.quantity))?;
                if ev.kind == EventKind::Execute {
                    BookChange::Executed {
                        side: loc.side,
                        price: loc.price,
                        order_id: ev.order_id,
                        quantity,
                        removed,
                    }
                } else {
                    BookChange::Removed {
                        side: loc.side,
                        price: loc.price,
                        order_id: ev.order_id,
                        quantity,
                        removed,
                    }
                }
            }
            EventKind::Delete => {
                let loc = self.locate(ev)?;
                let (quantity, _) = self.reduce(ev.order_id, loc, None)?;
                BookChange::Removed {
                    side: loc.side,
                    price: loc.price,
                    order_id: ev.order_id,
                    quantity,
                    removed: true,
                }
            }
            EventKind::Replace => {
                if ev.new_quantity == 0 {
                    return Err(BookError::ZeroQuantity(ev.kind));
                }
                if ev.new_price <= 0 {
                    return Err(BookError::NonPositivePrice(ev.new_price));
                }
                let loc = self.locate(ev)?;
                if ev.new_order_id != ev.order_id && self.orders.contains_key(&ev.new_order_id) {
                    return Err(BookError::DuplicateOrderId(ev.new_order_id));
                }
                // The old order sits on the same side, so removing it cannot
                // change the opposite touch.
                let crosses = self.would_cross(loc.side, ev.new_price);
                if crosses {
                    return Err(self.crossed_error(ev.timestamp));
                }
                let (old_quantity, _) = self.reduce(ev.order_id, loc, None)?;
                self.insert(ev.new_order_id, loc.side, ev.new_price, ev.new_quantity);
                BookChange::Replaced {
                    side: loc.side,
                    old_price: loc.price,
                    old_order_id: ev.order_id,
                    old_quantity,
                    new_price: ev.new_price,
                    new_order_id: ev.new_order_id,
                    new_quantity: ev.new_quantity,
                }
            }
        };
        self.last_timestamp = ev.timestamp;
        Ok(change)
    }

    /// Sweep the opposite side with a market order, consuming book liquidity.
    ///
    /// Levels are taken from the touch outward in FIFO order. Returns the
    /// per-level fills; an empty opposite side yields no fills.
    pub fn submit_market(&mut self, side: Side, quantity: Qty) -> Vec<(Price, Qty)> {
        self.take_liquidity(side, quantity, None)
    }

    /// Like [`submit_market`](Self::submit_market) but never trades through `limit`.
    pub fn take_liquidity(&mut self, side: Side, quantity: Qty, limit: Option<Price>) -> Vec<(Price, Qty)> {
        let mut fills: Vec<(Price, Qty)> = Vec::new();
        let mut left = quantity;
        let opposite = side.opposite();
        while left > 0 {
            let Some(touch) = self.best(opposite) else { break };
            if let Some(lim) = limit {
                if side.more_aggressive(touch, lim) {
                    break;
                }
            }
            let (order_id, resting) = self.side(opposite)[&touch].queue[0];
            let take = resting.min(left);
            let loc = Locator {
                side: opposite,
                price: touch,
            };
            // Cannot fail: the order was just read from the queue head.
            let _ = self.reduce(order_id, loc, Some(take));
            left -= take;
            match fills.last_mut() {
                Some((p, q)) if *p == touch => *q += take,
                _ => fills.push((touch, take)),
            }
        }
        fills
    }

    /// Check the structural invariants; used by tests and debug assertions.
    pub fn check_invariants(&self) -> Result<(), String> {
        if let (Some(b), Some(a)) = (self.best_bid(), self.best_ask()) {
            if b >= a {
                return Err(format!("crossed book: bid {b} >= ask {a}"));
            }
        }
        let mut count = 0;
        for (side, levels) in [(Side::Buy, &self.bids), (Side::Sell, &self.asks)] {
            for (price, level) in levels {
                if level.queue.is_empty() {
                    return Err(format!("empty level {side:?}@{price}"));
                }
                let sum: Qty = level.queue.iter().map(|(_, q)| *q).sum();
                if sum != level.total {
                    return Err(format!("level total mismatch {side:?}@{price}"));
                }
                for (id, q) in &level.queue {
                    if *q == 0 {
                        return Err(format!("zero-quantity entry {id}"));
                    }
                    match self.orders.get(id) {
                        Some(loc) if loc.side == side && loc.price == *price => {}
                        _ => return Err(format!("index mismatch for order {id}")),
                    }
                    count += 1;
                }
            }
        }
        if count != self.orders.len() {
            return Err("order index has stale entries".into());
        }
        Ok(())
    }
}
