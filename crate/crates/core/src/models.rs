//! Candidate orders and the per-step models the optimizer consumes: fill
//! probabilities, their covariance, per-share trading cost and the rollout
//! cost of whatever is left over.
//!
//! Costs are in spreads per share, signed so that positive is expensive for
//! the trader's side.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::orderbook::{OrderBook, Price, Side};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("no quote on the {0:?} side")]
    EmptyBookSide(Side),
    #[error("ladder needs at least 2 candidates, got {0}")]
    LadderTooShort(usize),
    #[error("spread must be positive")]
    ZeroSpread,
    #[error("oracle rollout needs the session close")]
    MissingClosePrice,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum OrderKind {
    Market,
    Limit,
    MidIoc,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CandidateOrder {
    pub index: usize,
    pub kind: OrderKind,
    /// Limit price in ticks; `None` for market orders. For mid-IOC this is
    /// the mid rounded toward the passive side.
    pub price: Option<Price>,
    pub venue: String,
}

impl CandidateOrder {
    pub fn is_market(&self) -> bool {
        self.kind == OrderKind::Market
    }
}

/// Top of book at a decision time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quote {
    pub bid: Option<Price>,
    pub ask: Option<Price>,
}

impl Quote {
    pub fn from_book(book: &OrderBook) -> Self {
        Quote {
            bid: book.best_bid(),
            ask: book.best_ask(),
        }
    }

    pub fn touch(&self, side: Side) -> Result<Price, ModelError> {
        match side {
            Side::Buy => self.bid,
            Side::Sell => self.ask,
        }
        .ok_or(ModelError::EmptyBookSide(side))
    }

    fn both(&self) -> Result<(Price, Price), ModelError> {
        Ok((self.touch(Side::Buy)?, self.touch(Side::Sell)?))
    }

    /// Mid in ticks.
    pub fn mid(&self) -> Result<f64, ModelError> {
        let (b, a) = self.both()?;
        Ok((b + a) as f64 / 2.0)
    }

    /// Spread in ticks.
    pub fn spread(&self) -> Result<f64, ModelError> {
        let (b, a) = self.both()?;
        if a <= b {
            return Err(ModelError::ZeroSpread);
        }
        Ok((a - b) as f64)
    }
}

const VENUE: &str = "sim";

/// Market order at index 0, then `d - 1` limits starting at our own touch and
/// stepping one tick more passive each time.
pub fn build_ladder(side: Side, quote: &Quote, d: usize) -> Result<Vec<CandidateOrder>, ModelError> {
    if d < 2 {
        return Err(ModelError::LadderTooShort(d));
    }
    let touch = quote.touch(side)?;
    let step = side.sign() as Price;
    let mut ladder = vec![CandidateOrder {
        index: 0,
        kind: OrderKind::Market,
        price: None,
        venue: VENUE.into(),
    }];
    ladder.extend((1..d).map(|i| CandidateOrder {
        index: i,
        kind: OrderKind::Limit,
        price: Some(touch - step * (i as Price - 1)),
        venue: VENUE.into(),
    }));
    Ok(ladder)
}

/// Append a mid-point immediate-or-cancel candidate.
pub fn push_mid_ioc(ladder: &mut Vec<CandidateOrder>, side: Side, quote: &Quote) -> Result<(), ModelError> {
    let mid = quote.mid()?;
    let price = match side {
        Side::Buy => mid.floor(),
        Side::Sell => mid.ceil(),
    } as Price;
    ladder.push(CandidateOrder {
        index: ladder.len(),
        kind: OrderKind::MidIoc,
        price: Some(price),
        venue: VENUE.into(),
    });
    Ok(())
}

/// Anything that can assign a fill probability to each candidate.
pub trait FillProbability {
    fn probabilities(&self, ladder: &[CandidateOrder]) -> Vec<f64>;
}

/// Fixed ladder: market orders always fill, limits fall linearly from `top`
/// for the first limit to `bottom` for the last.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LinearFillModel {
    pub top: f64,
    pub bottom: f64,
    pub mid_ioc: f64,
}

impl Default for LinearFillModel {
    fn default() -> Self {
        LinearFillModel {
            top: 0.9,
            bottom: 0.1,
            mid_ioc: 0.5,
        }
    }
}

impl FillProbability for LinearFillModel {
    fn probabilities(&self, ladder: &[CandidateOrder]) -> Vec<f64> {
        let limits = ladder.iter().filter(|c| c.kind == OrderKind::Limit).count();
        let mut j = 0;
        ladder
            .iter()
            .map(|c| match c.kind {
                OrderKind::Market => 1.0,
                OrderKind::MidIoc => self.mid_ioc,
                OrderKind::Limit => {
                    let p = if limits == 1 {
                        self.top
                    } else {
                        self.top - (self.top - self.bottom) * j as f64 / (limits - 1) as f64
                    };
                    j += 1;
                    p
                }
            })
            .collect()
    }
}

pub fn fill_probabilities(ladder: &[CandidateOrder]) -> Vec<f64> {
    LinearFillModel::default().probabilities(ladder)
}

/// Covariance of nested fill indicators: a deeper order only fills if every
/// shallower one does, so `cov(i, j) = min(pi_i, pi_j) - pi_i pi_j`.
pub fn fill_covariance(pi: &[f64]) -> DMatrix<f64> {
    let d = pi.len();
    let sigma = DMatrix::from_fn(d, d, |i, j| pi[i].min(pi[j]) - pi[i] * pi[j]);
    project_psd(sigma)
}

/// Clip tiny negative eigenvalues (round-off) to zero. Anything more negative
/// than -1e-10 is left alone so the caller's validation can see it.
pub fn project_psd(m: DMatrix<f64>) -> DMatrix<f64> {
    if m.nrows() == 0 {
        return m;
    }
    let eig = SymmetricEigen::new(m.clone());
    let min = eig.eigenvalues.min();
    if !(-1e-10..0.0).contains(&min) {
        return m;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&clipped) * v.transpose();
    (&out + out.transpose()) * 0.5
}

/// `phi (p_i - mid) / spread` per candidate; market orders pay half a spread
/// and mid-IOC pays nothing.
pub fn trading_cost(ladder: &[CandidateOrder], side: Side, quote: &Quote) -> Result<Vec<f64>, ModelError> {
    let spread = quote.spread()?;
    let mid = quote.mid()?;
    let phi = side.sign();
    Ok(ladder
        .iter()
        .map(|c| match (c.kind, c.price) {
            (OrderKind::Market, _) => 0.5,
            (OrderKind::MidIoc, _) => 0.0,
            (OrderKind::Limit, Some(p)) => phi * (p as f64 - mid) / spread,
            (OrderKind::Limit, None) => unreachable!("limit candidate without price"),
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RolloutMode {
    /// Finish by crossing the spread: half a spread per share.
    #[default]
    Default,
    /// Finish at the session close, known in hindsight.
    Oracle,
}

/// Cost per share, in spreads, of leaving quantity for the base policy.
/// `close` and `mid` share units with `spread`.
pub fn rollout_cost(
    mode: RolloutMode,
    side: Side,
    mid: f64,
    spread: f64,
    close: Option<f64>,
) -> Result<f64, ModelError> {
    match mode {
        RolloutMode::Default => Ok(0.5),
        RolloutMode::Oracle => {
            if !(spread > 0.0) {
                return Err(ModelError::ZeroSpread);
            }
            let close = close.ok_or(ModelError::MissingClosePrice)?;
            Ok(side.sign() * (close - mid) / spread)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quote(bid: Price, ask: Price) -> Quote {
        Quote {
            bid: Some(bid),
            ask: Some(ask),
        }
    }

    fn prices(ladder: &[CandidateOrder]) -> Vec<Option<Price>> {
        ladder.iter().map(|c| c.price).collect()
    }

    #[test]
    fn ladders() {
        let buy = build_ladder(Side::Buy, &quote(100, 102), 3).unwrap();
        assert!(buy[0].is_market());
        assert_eq!(prices(&buy), vec![None, Some(100), Some(99)]);
        let sell = build_ladder(Side::Sell, &quote(103, 105), 3).unwrap();
        assert_eq!(prices(&sell), vec![None, Some(105), Some(106)]);
        let full = build_ladder(Side::Buy, &quote(100, 102), 11).unwrap();
        assert_eq!(full.iter().filter(|c| c.kind == OrderKind::Limit).count(), 10);
        let empty = Quote { bid: None, ask: Some(5) };
        assert_eq!(build_ladder(Side::Buy, &empty, 3), Err(ModelError::EmptyBookSide(Side::Buy)));
    }

    #[test]
    fn linear_probabilities() {
        let q = quote(100, 102);
        let pi = fill_probabilities(&build_ladder(Side::Buy, &q, 11).unwrap());
        assert_eq!(pi[0], 1.0);
        assert!((pi[1] - 0.9).abs() < 1e-15);
        assert!((pi[2] - (0.9 - 0.8 / 9.0)).abs() < 1e-15);
        assert!((pi[10] - 0.1).abs() < 1e-15);
        let two = fill_probabilities(&build_ladder(Side::Buy, &q, 2).unwrap());
        assert_eq!(two, vec![1.0, 0.9]);
    }

    #[test]
    fn covariance_entries() {
        let s = fill_covariance(&[1.0, 0.9, 0.5, 0.1]);
        assert!((s[(1, 3)] - 0.01).abs() < 1e-15);
        assert!((s[(2, 2)] - 0.25).abs() < 1e-15);
        assert!((0..4).all(|j| s[(0, j)] == 0.0 && s[(j, 0)] == 0.0));
    }

    #[test]
    fn costs() {
        let q = quote(99, 101);
        let mut ladder = build_ladder(Side::Buy, &q, 3).unwrap();
        push_mid_ioc(&mut ladder, Side::Buy, &q).unwrap();
        assert_eq!(trading_cost(&ladder, Side::Buy, &q).unwrap(), vec![0.5, -0.5, -1.0, 0.0]);
        let sell = build_ladder(Side::Sell, &q, 3).unwrap();
        assert_eq!(trading_cost(&sell, Side::Sell, &q).unwrap(), vec![0.5, -0.5, -1.0]);
        assert_eq!(trading_cost(&ladder, Side::Buy, &quote(100, 100)), Err(ModelError::ZeroSpread));
    }

    #[test]
    fn rollout() {
        assert_eq!(rollout_cost(RolloutMode::Default, Side::Buy, 100.0, 0.5, None).unwrap(), 0.5);
        assert_eq!(rollout_cost(RolloutMode::Oracle, Side::Buy, 100.0, 0.5, Some(101.0)).unwrap(), 2.0);
        assert_eq!(rollout_cost(RolloutMode::Oracle, Side::Sell, 100.0, 0.5, Some(101.0)).unwrap(), -2.0);
        assert_eq!(
            rollout_cost(RolloutMode::Oracle, Side::Buy, 100.0, 0.5, None),
            Err(ModelError::MissingClosePrice)
        );
    }
}
