use std::collections::HashSet;

use super::{BookError, Nanos, Price, Qty, Side};

/// How executed volume at our price level is credited to a resting order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FillRule {
    /// Credit volume as soon as it penetrates past the queue ahead of us.
    #[default]
    Penetration,
    /// Credit only volume that also clears our own quantity, i.e. volume that
    /// reached orders queued behind us.
    BehindUs,
}

/// One of our orders resting in (or submitted to) the simulated book.
#[derive(Debug, Clone)]
pub struct TrackedOrder {
    pub side: Side,
    pub price: Price,
    pub quantity: Qty,
    /// Shares ahead of us at our price. Starts at the level total on joining
    /// and shrinks as orders that were ahead cancel or leave.
    pub queue_ahead: Qty,
    pub filled: Qty,
    pub submit_timestamp: Nanos,
    pub active: bool,
    pub rule: FillRule,
    /// Fills credited outside the queue (trade-through or crossing adds).
    through_credit: Qty,
    /// Cumulative executed volume at our price since joining.
    executed_at_level: Qty,
    ahead_ids: HashSet<u64>,
}

impl TrackedOrder {
    pub fn new(side: Side, price: Price, quantity: Qty, queue_ahead: Qty, submit_timestamp: Nanos) -> Self {
        TrackedOrder {
            side,
            price,
            quantity,
            queue_ahead,
            filled: 0,
            submit_timestamp,
            active: true,
            rule: FillRule::Penetration,
            through_credit: 0,
            executed_at_level: 0,
            ahead_ids: HashSet::new(),
        }
    }

    pub fn with_rule(mut self, rule: FillRule) -> Self {
        self.rule = rule;
        self
    }

    pub(crate) fn set_ahead_ids(&mut self, ids: impl IntoIterator<Item = u64>) {
        self.ahead_ids = ids.into_iter().collect();
    }

    pub fn remaining(&self) -> Qty {
        self.quantity - self.filled
    }

    pub fn executed_at_level(&self) -> Qty {
        self.executed_at_level
    }

    fn threshold(&self) -> Qty {
        match self.rule {
            FillRule::Penetration => self.queue_ahead,
            FillRule::BehindUs => self.queue_ahead + self.quantity,
        }
    }

    /// Update with the cumulative executed volume at our price since we
    /// joined. Returns the newly credited fill.
    ///
    /// Fills depend only on the cumulative figure, so reporting executions one
    /// by one or in batches gives the same total.
    pub fn on_market_trade(&mut self, executed_at_level: Qty) -> Result<Qty, BookError> {
        if !self.active {
            return Err(BookError::InactiveOrder);
        }
        self.executed_at_level = self.executed_at_level.max(executed_at_level);
        Ok(self.settle())
    }

    fn settle(&mut self) -> Qty {
        let queued = self.executed_at_level.saturating_sub(self.threshold());
        let target = (queued + self.through_credit).min(self.quantity);
        let fill = target.saturating_sub(self.filled);
        self.filled += fill;
        fill
    }

    /// Volume that traded at a price worse than ours on our side, or an
    /// opposite order that arrived at or through our price. Either way we
    /// would have been at the front and are filled directly.
    pub(crate) fn credit_through(&mut self, quantity: Qty) -> Qty {
        if !self.active {
            return 0;
        }
        self.through_credit += quantity;
        self.settle()
    }

    /// An order at our price was executed; returns the new fill.
    pub(crate) fn on_level_execution(&mut self, order_id: u64, quantity: Qty, removed: bool) -> Qty {
        if removed {
            self.ahead_ids.remove(&order_id);
        }
        let executed = self.executed_at_level + quantity;
        self.on_market_trade(executed).unwrap_or(0)
    }

    /// An order at our price was cancelled (fully or partly).
    pub(crate) fn on_level_removal(&mut self, order_id: u64, quantity: Qty, removed: bool) {
        let ahead = if removed {
            self.ahead_ids.remove(&order_id)
        } else {
            self.ahead_ids.contains(&order_id)
        };
        if ahead {
            self.queue_ahead = self.queue_ahead.saturating_sub(quantity);
        }
    }

    /// Deactivate and return the unfilled residual.
    pub fn cancel(&mut self) -> Result<Qty, BookError> {
        if !self.active {
            return Err(BookError::InactiveOrder);
        }
        self.active = false;
        Ok(self.remaining())
    }
}
