use std::collections::HashMap;

use super::{BookChange, BookError, BookEvent, FillRule, Nanos, OrderBook, Price, Qty, Side, TrackedOrder};

/// Default order-to-book latency: 10 ms.
pub const DEFAULT_LATENCY_NS: Nanos = 10_000_000;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SimConfig {
    pub latency_ns: Nanos,
    pub fill_rule: FillRule,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            latency_ns: DEFAULT_LATENCY_NS,
            fill_rule: FillRule::Penetration,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct OrderHandle(pub usize);

/// One execution of one of our orders.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimFill {
    pub handle: OrderHandle,
    pub timestamp: Nanos,
    pub price: Price,
    pub quantity: Qty,
}

#[derive(Debug, Clone, Copy)]
enum Instruction {
    /// Marketable limit at `limit`; the residual rests there.
    Limit { limit: Price },
    /// Take what is available up to `limit`, never rest.
    ImmediateOrCancel { limit: Price },
}

#[derive(Debug, Clone)]
struct Pending {
    handle: OrderHandle,
    effective: Nanos,
    instruction: Instruction,
}

/// Shadow execution of our orders against a replayed public book.
///
/// Our orders reach the book `latency_ns` after submission. Liquidity we take
/// is remembered per public order id so two of our orders cannot consume the
/// same shares, but the public book itself is never modified by us, and the
/// public stream keeps replaying unchanged.
#[derive(Debug, Clone)]
pub struct ExchangeSim {
    book: OrderBook,
    config: SimConfig,
    orders: Vec<TrackedOrder>,
    /// Indices of active orders that have reached the book.
    resting: Vec<usize>,
    pending: Vec<Pending>,
    consumed: HashMap<u64, Qty>,
    fills: Vec<SimFill>,
    clock: Nanos,
}

impl ExchangeSim {
    pub fn new(tick_size: f64, config: SimConfig) -> Self {
        ExchangeSim {
            book: OrderBook::new(tick_size),
            config,
            orders: Vec::new(),
            resting: Vec::new(),
            pending: Vec::new(),
            consumed: HashMap::new(),
            fills: Vec::new(),
            clock: 0,
        }
    }

    pub fn book(&self) -> &OrderBook {
        &self.book
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn clock(&self) -> Nanos {
        self.clock
    }

    pub fn order(&self, handle: OrderHandle) -> &TrackedOrder {
        &self.orders[handle.0]
    }

    pub fn fills(&self) -> &[SimFill] {
        &self.fills
    }

    pub fn is_pending(&self, handle: OrderHandle) -> bool {
        self.pending.iter().any(|p| p.handle == handle)
    }

    /// Handles of orders that are resting or still in flight.
    pub fn open_orders(&self) -> Vec<OrderHandle> {
        let mut handles: Vec<OrderHandle> = self
            .resting
            .iter()
            .map(|&i| OrderHandle(i))
            .chain(self.pending.iter().map(|p| p.handle))
            .collect();
        handles.sort();
        handles
    }

    /// Replay one public event. Our in-flight orders whose effective time is
    /// at or before the event reach the book first.
    pub fn process(&mut self, ev: &BookEvent) -> Result<(), BookError> {
        self.activate_until(ev.timestamp);
        let change = self.book.apply(ev)?;
        self.clock = self.clock.max(ev.timestamp);
        self.on_change(change, ev.timestamp);
        Ok(())
    }

    /// Move the clock forward without a market event.
    pub fn advance_clock(&mut self, now: Nanos) {
        self.activate_until(now);
        self.clock = self.clock.max(now);
    }

    /// Submit a market order at `now`.
    ///
    /// The order is priced as a marketable limit at the far-touch level that
    /// the book observed at submission would need to fill `quantity`. It
    /// reaches the book after the latency; anything not immediately
    /// executable then rests at that price. Returns `None` when the opposite
    /// side is empty at submission.
    pub fn submit_market(&mut self, side: Side, quantity: Qty, now: Nanos) -> Option<OrderHandle> {
        if quantity == 0 {
            return None;
        }
        self.advance_clock(now);
        let limit = self.sweep_price(side, quantity)?;
        Some(self.enqueue(side, limit, quantity, now, Instruction::Limit { limit }))
    }

    /// Submit a limit order at `now`. A marketable portion executes on arrival
    /// and the residual joins the back of the queue at `price`.
    pub fn submit_limit(&mut self, side: Side, price: Price, quantity: Qty, now: Nanos) -> Option<OrderHandle> {
        if quantity == 0 {
            return None;
        }
        self.advance_clock(now);
        Some(self.enqueue(side, price, quantity, now, Instruction::Limit { limit: price }))
    }

    /// Immediate-or-cancel at `price`: takes what is available on arrival and
    /// never rests.
    pub fn submit_ioc(&mut self, side: Side, price: Price, quantity: Qty, now: Nanos) -> Option<OrderHandle> {
        if quantity == 0 {
            return None;
        }
        self.advance_clock(now);
        Some(self.enqueue(
            side,
            price,
            quantity,
            now,
            Instruction::ImmediateOrCancel { limit: price },
        ))
    }

    /// Cancel one of our orders, returning the unfilled residual. Orders
    /// still in flight are withdrawn before reaching the book.
    pub fn cancel(&mut self, handle: OrderHandle) -> Result<Qty, BookError> {
        if let Some(pos) = self.pending.iter().position(|p| p.handle == handle) {
            self.pending.remove(pos);
        }
        let residual = self
            .orders
            .get_mut(handle.0)
            .ok_or(BookError::InactiveOrder)?
            .cancel()?;
        self.resting.retain(|&i| i != handle.0);
        Ok(residual)
    }

    /// Cancel everything open; returns total residual.
    pub fn cancel_all(&mut self) -> Qty {
        self.open_orders()
            .into_iter()
            .map(|h| self.cancel(h).unwrap_or(0))
            .sum()
    }

    fn enqueue(&mut self, side: Side, price: Price, quantity: Qty, now: Nanos, instruction: Instruction) -> OrderHandle {
        let handle = OrderHandle(self.orders.len());
        let order = TrackedOrder::new(side, price, quantity, 0, now).with_rule(self.config.fill_rule);
        self.orders.push(order);
        self.pending.push(Pending {
            handle,
            effective: now + self.config.latency_ns,
            instruction,
        });
        if self.config.latency_ns == 0 {
            self.activate_until(now);
        }
        handle
    }

    /// Worst price needed to fill `quantity` against the visible opposite side.
    fn sweep_price(&self, side: Side, quantity: Qty) -> Option<Price> {
        let mut left = quantity;
        let mut last = None;
        for (price, level) in self.book.levels_from_touch(side.opposite()) {
            last = Some(price);
            let available: Qty = level
                .queue
                .iter()
                .map(|(id, q)| q - self.consumed.get(id).copied().unwrap_or(0).min(*q))
                .sum();
            left = left.saturating_sub(available);
            if left == 0 {
                break;
            }
        }
        last
    }

    fn activate_until(&mut self, now: Nanos) {
        // Pending orders are activated in effective-time then submission order.
        loop {
            let next = self
                .pending
                .iter()
                .enumerate()
                .filter(|(_, p)| p.effective <= now)
                .min_by_key(|(_, p)| (p.effective, p.handle))
                .map(|(i, _)| i);
            let Some(i) = next else { break };
            let pending = self.pending.remove(i);
            self.activate(pending);
        }
    }

    fn activate(&mut self, pending: Pending) {
        let handle = pending.handle;
        let (side, quantity) = {
            let o = &self.orders[handle.0];
            (o.side, o.quantity)
        };
        let limit = match pending.instruction {
            Instruction::Limit { limit } | Instruction::ImmediateOrCancel { limit } => limit,
        };
        let taken = self.take(handle, side, quantity, limit, pending.effective);
        let order = &mut self.orders[handle.0];
        order.filled += taken;
        order.submit_timestamp = order.submit_timestamp.min(pending.effective);
        match pending.instruction {
            Instruction::ImmediateOrCancel { .. } => {
                order.active = false;
            }
            Instruction::Limit { limit } => {
                if order.remaining() > 0 {
                    let ahead_ids: Vec<u64> = self.book.level_orders(side, limit).map(|(id, _)| id).collect();
                    let public_ahead = self.book.level_quantity(side, limit);
                    let own_ahead: Qty = self
                        .resting
                        .iter()
                        .map(|&i| &self.orders[i])
                        .filter(|o| o.side == side && o.price == limit)
                        .map(|o| o.remaining())
                        .sum();
                    let order = &mut self.orders[handle.0];
                    order.queue_ahead = public_ahead + own_ahead;
                    order.set_ahead_ids(ahead_ids);
                    self.resting.push(handle.0);
                }
            }
        }
    }

    /// Take opposite liquidity priced at or better than `limit`, honouring
    /// what we have already consumed.
    fn take(&mut self, handle: OrderHandle, side: Side, quantity: Qty, limit: Price, now: Nanos) -> Qty {
        let mut left = quantity;
        let mut taken_total = 0;
        let mut level_fills: Vec<(Price, Qty)> = Vec::new();
        let mut consumed_updates: Vec<(u64, Qty)> = Vec::new();
        for (price, level) in self.book.levels_from_touch(side.opposite()) {
            if left == 0 || side.more_aggressive(price, limit) {
                break;
            }
            let mut at_level = 0;
            for (id, q) in &level.queue {
                if left == 0 {
                    break;
                }
                let used = self.consumed.get(id).copied().unwrap_or(0);
                let available = q.saturating_sub(used);
                let take = available.min(left);
                if take > 0 {
                    consumed_updates.push((*id, take));
                    left -= take;
                    at_level += take;
                }
            }
            if at_level > 0 {
                level_fills.push((price, at_level));
                taken_total += at_level;
            }
        }
        for (id, q) in consumed_updates {
            *self.consumed.entry(id).or_insert(0) += q;
        }
        for (price, qty) in level_fills {
            self.fills.push(SimFill {
                handle,
                timestamp: now,
                price,
                quantity: qty,
            });
        }
        taken_total
    }

    fn on_change(&mut self, change: BookChange, now: Nanos) {
        match change {
            BookChange::Added {
                side,
                price,
                order_id,
                quantity,
            } => self.on_opposite_add(side, price, order_id, quantity, now),
            BookChange::Executed {
                side,
                price,
                order_id,
                quantity,
                removed,
            } => {
                self.release_consumed(order_id, removed);
                self.on_execution(side, price, order_id, quantity, removed, now);
            }
            BookChange::Removed {
                side,
                price,
                order_id,
                quantity,
                removed,
            } => {
                self.release_consumed(order_id, removed);
                for &i in &self.resting {
                    let o = &mut self.orders[i];
                    if o.side == side && o.price == price {
                        o.on_level_removal(order_id, quantity, removed);
                    }
                }
            }
            BookChange::Replaced {
                side,
                old_price,
                old_order_id,
                old_quantity,
                new_price,
                new_order_id,
                new_quantity,
            } => {
                self.release_consumed(old_order_id, true);
                for &i in &self.resting {
                    let o = &mut self.orders[i];
                    if o.side == side && o.price == old_price {
                        o.on_level_removal(old_order_id, old_quantity, true);
                    }
                }
                self.on_opposite_add(side, new_price, new_order_id, new_quantity, now);
            }
        }
    }

    fn release_consumed(&mut self, order_id: u64, removed: bool) {
        if removed {
            self.consumed.remove(&order_id);
        } else if let Some(remaining) = self.book.order_quantity(order_id) {
            if let Some(c) = self.consumed.get_mut(&order_id) {
                *c = (*c).min(remaining);
            }
        }
    }

    fn on_execution(&mut self, side: Side, price: Price, order_id: u64, quantity: Qty, removed: bool, now: Nanos) {
        let mut new_fills = Vec::new();
        for &i in &self.resting {
            let o = &mut self.orders[i];
            if o.side != side || o.remaining() == 0 {
                continue;
            }
            let fill = if o.price == price {
                o.on_level_execution(order_id, quantity, removed)
            } else if side.more_aggressive(o.price, price) {
                // Traded through our price: we would have been hit first.
                o.credit_through(quantity)
            } else {
                0
            };
            if fill > 0 {
                new_fills.push(SimFill {
                    handle: OrderHandle(i),
                    timestamp: now,
                    price: o.price,
                    quantity: fill,
                });
            }
        }
        self.fills.extend(new_fills);
    }

    /// A public order arrived at or through the price of one of our resting
    /// orders on the other side.
    fn on_opposite_add(&mut self, side: Side, price: Price, order_id: u64, quantity: Qty, now: Nanos) {
        let mut left = quantity;
        let mut new_fills = Vec::new();
        for &i in &self.resting {
            if left == 0 {
                break;
            }
            let o = &mut self.orders[i];
            if o.side == side || o.remaining() == 0 {
                continue;
            }
            let crosses = match o.side {
                Side::Buy => price <= o.price,
                Side::Sell => price >= o.price,
            };
            if !crosses {
                continue;
            }
            let fill = o.credit_through(left);
            if fill > 0 {
                left -= fill;
                new_fills.push(SimFill {
                    handle: OrderHandle(i),
                    timestamp: now,
                    price: o.price,
                    quantity: fill,
                });
            }
        }
        let used = quantity - left;
        if used > 0 {
            *self.consumed.entry(order_id).or_insert(0) += used;
        }
        self.fills.extend(new_fills);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MS: Nanos = 1_000_000;

    fn sim(latency_ns: Nanos, events: &[BookEvent]) -> ExchangeSim {
        let mut sim = ExchangeSim::new(
            0.01,
            SimConfig {
                latency_ns,
                fill_rule: FillRule::Penetration,
            },
        );
        for ev in events {
            sim.process(ev).unwrap();
        }
        sim
    }

    fn filled(sim: &ExchangeSim, h: OrderHandle) -> Qty {
        sim.order(h).filled
    }

    #[test]
    fn market_order_sweeps_two_levels() {
        let mut s = sim(
            0,
            &[
                BookEvent::add(0, 1, Side::Sell, 101, 50),
                BookEvent::add(0, 2, Side::Sell, 102, 50),
            ],
        );
        let h = s.submit_market(Side::Buy, 70, 0).unwrap();
        let fills: Vec<_> = s.fills().iter().map(|f| (f.price, f.quantity)).collect();
        assert_eq!(fills, vec![(101, 50), (102, 20)]);
        assert_eq!(filled(&s, h), 70);
        // the public book is untouched
        assert_eq!(s.book().level_quantity(Side::Sell, 101), 50);
        // but the shares we took cannot be taken twice
        let h2 = s.submit_market(Side::Buy, 40, 0).unwrap();
        let fills: Vec<_> = s.fills().iter().skip(2).map(|f| (f.price, f.quantity)).collect();
        assert_eq!(fills, vec![(102, 30)]);
        assert_eq!(s.order(h2).remaining(), 10);
    }

    #[test]
    fn latency_moves_far_touch_away() {
        let mut s = sim(
            10 * MS,
            &[
                BookEvent::add(0, 1, Side::Sell, 101, 50),
                BookEvent::add(0, 2, Side::Buy, 99, 50),
            ],
        );
        let h = s.submit_market(Side::Buy, 10, 100 * MS).unwrap();
        assert!(s.is_pending(h));
        // within the latency window the ask lifts to 102
        s.process(&BookEvent::add(105 * MS, 3, Side::Sell, 102, 50)).unwrap();
        s.process(&BookEvent::execute(105 * MS, 1, Side::Sell, 101, 50)).unwrap();
        s.advance_clock(111 * MS);
        assert!(!s.is_pending(h));
        assert_eq!(filled(&s, h), 0);
        let o = s.order(h);
        assert!(o.active);
        assert_eq!(o.price, 101);
        assert_eq!(o.queue_ahead, 0);
        // a seller arriving at 101 later trades with our resting residual
        s.process(&BookEvent::add(200 * MS, 4, Side::Sell, 101, 4)).unwrap();
        assert_eq!(filled(&s, h), 4);
    }

    #[test]
    fn no_interaction_before_latency_elapses() {
        let mut s = sim(10 * MS, &[BookEvent::add(0, 1, Side::Buy, 100, 200)]);
        let h = s.submit_limit(Side::Buy, 100, 10, 0).unwrap();
        // executions during the latency window do not touch us
        s.process(&BookEvent::execute(5 * MS, 1, Side::Buy, 100, 150)).unwrap();
        s.process(&BookEvent::add(10 * MS, 2, Side::Buy, 100, 30)).unwrap();
        let o = s.order(h);
        assert_eq!(o.queue_ahead, 50);
        assert_eq!(o.filled, 0);
    }

    #[test]
    fn limit_join_and_create() {
        let mut s = sim(0, &[BookEvent::add(0, 1, Side::Buy, 100, 200)]);
        let join = s.submit_limit(Side::Buy, 100, 10, 0).unwrap();
        let new = s.submit_limit(Side::Buy, 98, 10, 0).unwrap();
        assert_eq!(s.order(join).queue_ahead, 200);
        assert_eq!(s.order(new).queue_ahead, 0);
    }

    #[test]
    fn marketable_limit_executes_then_rests() {
        let mut s = sim(
            0,
            &[
                BookEvent::add(0, 1, Side::Sell, 101, 30),
                BookEvent::add(0, 2, Side::Sell, 102, 30),
            ],
        );
        let h = s.submit_limit(Side::Buy, 101, 50, 0).unwrap();
        assert_eq!(filled(&s, h), 30);
        let o = s.order(h);
        assert!(o.active);
        assert_eq!(o.remaining(), 20);
    }

    #[test]
    fn queue_fills_and_trade_through() {
        let mut s = sim(
            0,
            &[
                BookEvent::add(0, 1, Side::Buy, 100, 100),
                BookEvent::add(0, 2, Side::Buy, 99, 100),
            ],
        );
        let h = s.submit_limit(Side::Buy, 100, 50, 0).unwrap();
        s.process(&BookEvent::add(1, 3, Side::Buy, 100, 100)).unwrap();
        s.process(&BookEvent::execute(2, 1, Side::Buy, 100, 100)).unwrap();
        assert_eq!(filled(&s, h), 0);
        s.process(&BookEvent::execute(3, 3, Side::Buy, 100, 30)).unwrap();
        assert_eq!(filled(&s, h), 30);
        s.process(&BookEvent::delete(4, 3, Side::Buy, 100)).unwrap();
        s.process(&BookEvent::execute(5, 2, Side::Buy, 99, 5)).unwrap();
        assert_eq!(filled(&s, h), 35);
        assert_eq!(s.cancel(h).unwrap(), 15);
        assert_eq!(s.cancel(h), Err(BookError::InactiveOrder));
    }

    #[test]
    fn earlier_joiner_fills_first() {
        let mut s = sim(0, &[BookEvent::add(0, 1, Side::Buy, 100, 40)]);
        let first = s.submit_limit(Side::Buy, 100, 20, 0).unwrap();
        let second = s.submit_limit(Side::Buy, 100, 20, 1).unwrap();
        assert_eq!(s.order(second).queue_ahead, 60);
        s.process(&BookEvent::add(2, 2, Side::Buy, 100, 100)).unwrap();
        s.process(&BookEvent::execute(3, 1, Side::Buy, 100, 40)).unwrap();
        s.process(&BookEvent::execute(4, 2, Side::Buy, 100, 30)).unwrap();
        assert_eq!(filled(&s, first), 20);
        assert_eq!(filled(&s, second), 10);
    }
}
