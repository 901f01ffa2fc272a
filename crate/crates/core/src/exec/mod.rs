//! Parent-order episodes: the decision loop tying the schedule, the models,
//! the optimizer and the exchange simulator together.
//!
//! Quantities seen by policies are in percent of the parent. They become
//! shares through the parent's notional at the arrival mid.

mod policy;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

pub use policy::{
    crossing_policy, mpc_policy, Decision, MpcConfig, MpcState, PolicyKind, Solved, TubeDecay,
};

use crate::marketdata::{accumulate_vwap, MarketDataError, MarketSession};
use crate::metrics::swap_price;
use crate::models::{ModelError, OrderKind, Quote};
use crate::mpc::{BarrierSolver, MpcError, Violations};
use crate::orderbook::{BookError, ExchangeSim, FillRule, Nanos, OrderHandle, Qty, Side, SimConfig, DEFAULT_LATENCY_NS};
use crate::schedule::{Schedule, ScheduleError};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExecError {
    #[error("market stream ends at {available} ns, episode needs {needed} ns")]
    StreamExhausted { needed: Nanos, available: Nanos },
    #[error("no two-sided quote at step {0}")]
    EmptyBook(usize),
    #[error("invalid parent order: {0}")]
    InvalidParent(String),
    #[error("schedule has {schedule} steps, parent has {parent}")]
    StepMismatch { schedule: usize, parent: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Mpc(#[from] MpcError),
    #[error(transparent)]
    Book(#[from] BookError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    MarketData(#[from] MarketDataError),
}

/// The client order. `quantity` is in percent units (100 = the whole order);
/// `notional` fixes the share count at the arrival mid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParentOrder {
    pub side: Side,
    pub quantity: f64,
    pub notional: f64,
    pub steps: usize,
    pub interval_ns: Nanos,
    pub start_ns: Nanos,
}

impl ParentOrder {
    /// $10K over a 6.5 hour session in 5 minute steps.
    pub fn new(side: Side) -> Self {
        ParentOrder {
            side,
            quantity: 100.0,
            notional: 10_000.0,
            steps: 78,
            interval_ns: 300_000_000_000,
            start_ns: 0,
        }
    }

    pub fn decision_time(&self, t: usize) -> Nanos {
        self.start_ns + t as Nanos * self.interval_ns
    }

    pub fn end_ns(&self) -> Nanos {
        self.decision_time(self.steps)
    }

    fn validate(&self) -> Result<(), ExecError> {
        if self.steps == 0 || self.interval_ns == 0 {
            return Err(ExecError::InvalidParent("need at least one step of positive length".into()));
        }
        if !(self.quantity > 0.0) || !self.quantity.is_finite() {
            return Err(ExecError::InvalidParent(format!("quantity {}", self.quantity)));
        }
        if !(self.notional >= 0.0) || !self.notional.is_finite() {
            return Err(ExecError::InvalidParent(format!("notional {}", self.notional)));
        }
        Ok(())
    }
}

/// Simulator and order-conversion settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExecConfig {
    pub latency_ns: Nanos,
    pub fill_rule: FillRule,
    /// Allocations below this (percent of the parent) are not sent.
    pub min_order: f64,
}

impl Default for ExecConfig {
    fn default() -> Self {
        ExecConfig {
            latency_ns: DEFAULT_LATENCY_NS,
            fill_rule: FillRule::Penetration,
            min_order: 0.01,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeFill {
    pub step: usize,
    pub timestamp: Nanos,
    /// In currency.
    pub price: f64,
    pub shares: Qty,
    /// Index of the ladder candidate that produced the fill.
    pub candidate: usize,
}

/// Everything recorded at one decision step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: usize,
    pub time_ns: Nanos,
    pub q: f64,
    pub s: f64,
    pub s_next: f64,
    /// Mid and spread in ticks.
    pub mid: f64,
    pub spread: f64,
    pub u: Vec<f64>,
    pub shares: Vec<Qty>,
    /// Predicted deviation and variance after the step.
    pub m_hat: f64,
    pub v_hat: f64,
    pub slack: f64,
    /// Constraint violations of the optimizer's allocation; `None` for the
    /// crossing policy, which has no constraints.
    pub violations: Option<Violations>,
    /// How far submitted shares overshoot the upper tube, percent units.
    pub submitted_excess: f64,
    pub solve_ns: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeResult {
    pub policy: PolicyKind,
    pub side: Side,
    pub total_shares: Qty,
    pub fills: Vec<EpisodeFill>,
    pub steps: Vec<StepRecord>,
    /// `q_t - s_t` for `t = 0..=T`.
    pub epsilon: Vec<f64>,
    /// `s_0..=s_T`.
    pub schedule: Vec<f64>,
    /// Mid at each decision time `t = 0..T`, in currency.
    pub mids: Vec<f64>,
    pub p0: f64,
    pub p_fwap: Option<f64>,
    pub p_swap: f64,
    pub p_vwap: Option<f64>,
    /// `q_T / Q`.
    pub completion: f64,
}

impl EpisodeResult {
    pub fn filled_shares(&self) -> Qty {
        self.fills.iter().map(|f| f.shares).sum()
    }

    pub fn m_hat(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.m_hat)
    }

    pub fn v_hat(&self) -> impl Iterator<Item = f64> + '_ {
        self.steps.iter().map(|s| s.v_hat)
    }

    /// Largest constraint violation over all steps, percent units.
    pub fn max_violation(&self) -> f64 {
        self.steps
            .iter()
            .map(|s| s.violations.map_or(0.0, |v| v.max()).max(s.submitted_excess))
            .fold(0.0, f64::max)
    }
}

/// Replays `session` while running `policy` for one parent order.
///
/// At each step `t < T`: replay market events up to the decision time, cancel
/// whatever is left of the previous step's orders, read the state, decide
/// and submit. At `t = T` the last orders are cancelled and anything unfilled
/// is left as incompletion.
pub fn run_episode(
    policy: PolicyKind,
    session: &MarketSession,
    parent: &ParentOrder,
    schedule: &Schedule,
    mpc: &MpcConfig,
    exec: &ExecConfig,
) -> Result<EpisodeResult, ExecError> {
    parent.validate()?;
    if schedule.steps != parent.steps {
        return Err(ExecError::StepMismatch {
            schedule: schedule.steps,
            parent: parent.steps,
        });
    }
    if session.session_end_ns < parent.end_ns() {
        return Err(ExecError::StreamExhausted {
            needed: parent.end_ns(),
            available: session.session_end_ns,
        });
    }
    mpc.validate().map_err(MpcError::InvalidParameter)?;
    let close = match policy {
        PolicyKind::MpcOracle => session.closing_mid()?,
        _ => None,
    };

    let tick = session.tick_size;
    let total = parent.quantity;
    let side = parent.side;
    let path = schedule.path();
    let mut sim = ExchangeSim::new(
        tick,
        SimConfig {
            latency_ns: exec.latency_ns,
            fill_rule: exec.fill_rule,
        },
    );
    let mut solver = BarrierSolver::default();
    let mut cursor = 0;
    let mut replay = |sim: &mut ExchangeSim, until: Nanos| -> Result<(), ExecError> {
        let events = &session.events;
        while cursor < events.len() && events[cursor].timestamp <= until {
            sim.process(&events[cursor])?;
            cursor += 1;
        }
        sim.advance_clock(until);
        Ok(())
    };

    let mut shares_per_unit = 0.0;
    let mut total_shares = 0;
    let mut origin: HashMap<OrderHandle, (usize, usize)> = HashMap::new();
    let mut steps = Vec::with_capacity(parent.steps);
    let mut epsilon = Vec::with_capacity(parent.steps + 1);
    let mut mids = Vec::with_capacity(parent.steps);
    let filled = |sim: &ExchangeSim| -> Qty { sim.fills().iter().map(|f| f.quantity).sum() };

    for t in 0..parent.steps {
        let now = parent.decision_time(t);
        replay(&mut sim, now)?;
        sim.cancel_all();
        let quote = Quote::from_book(sim.book());
        let (mid, spread) = match (quote.mid(), quote.spread()) {
            (Ok(m), Ok(s)) => (m, s),
            _ => return Err(ExecError::EmptyBook(t)),
        };
        if t == 0 {
            total_shares = (parent.notional / (mid * tick)).floor() as Qty;
            shares_per_unit = total_shares as f64 / total;
        }
        mids.push(mid * tick);
        let done = filled(&sim);
        let q = if total_shares == 0 { 0.0 } else { done as f64 / shares_per_unit };
        let (s, s_next) = (path[t], path[t + 1]);
        epsilon.push(q - s);

        let decision = match policy.rollout() {
            None => crossing_policy(q, s_next),
            Some(mode) => {
                let state = MpcState {
                    side,
                    quote,
                    q,
                    s_next,
                    total,
                    t,
                    steps: parent.steps,
                    close,
                };
                mpc_policy(&mut solver, &state, mode, mpc)?
            }
        };

        // Round down to whole shares; the remainder shows up as next step's
        // deficit.
        let shares: Vec<Qty> = decision
            .u
            .iter()
            .map(|&x| {
                if x < exec.min_order {
                    0
                } else {
                    (x * shares_per_unit + 1e-9).floor().max(0.0) as Qty
                }
            })
            .collect();
        for (c, &n) in decision.ladder.iter().zip(&shares) {
            let handle = match (c.kind, c.price) {
                (OrderKind::Market, _) => sim.submit_market(side, n, now),
                (OrderKind::Limit, Some(p)) => sim.submit_limit(side, p, n, now),
                (OrderKind::MidIoc, Some(p)) => sim.submit_ioc(side, p, n, now),
                (_, None) => None,
            };
            if let Some(h) = handle {
                origin.insert(h, (t, c.index));
            }
        }

        let submitted = if total_shares == 0 {
            0.0
        } else {
            shares.iter().sum::<Qty>() as f64 / shares_per_unit
        };
        let (m_hat, v_hat, slack, violations, solve_ns, upper) = match &decision.solved {
            Some(sv) => (
                sv.control.m_hat,
                sv.control.v_hat,
                sv.control.slack,
                Some(sv.violations),
                sv.solve_ns,
                sv.problem.s_next + sv.problem.rho_upper,
            ),
            None => (q + decision.u[0] - s_next, 0.0, 0.0, None, 0, f64::INFINITY),
        };
        steps.push(StepRecord {
            t,
            time_ns: now,
            q,
            s,
            s_next,
            mid,
            spread,
            u: decision.u,
            shares,
            m_hat,
            v_hat,
            slack,
            violations,
            submitted_excess: (q + submitted - upper).max(0.0),
            solve_ns,
        });
    }

    replay(&mut sim, parent.end_ns())?;
    sim.cancel_all();
    let done = filled(&sim);
    let q_end = if total_shares == 0 { 0.0 } else { done as f64 / shares_per_unit };
    epsilon.push(q_end - path[parent.steps]);

    let fills: Vec<EpisodeFill> = sim
        .fills()
        .iter()
        .map(|f| {
            let (step, candidate) = origin[&f.handle];
            EpisodeFill {
                step,
                timestamp: f.timestamp,
                price: f.price as f64 * tick,
                shares: f.quantity,
                candidate,
            }
        })
        .collect();
    let p_fwap = (done > 0).then(|| fills.iter().map(|f| f.price * f.shares as f64).sum::<f64>() / done as f64);
    let p_swap = swap_price(&path, &mids).expect("one mid per step");
    let p_vwap = match accumulate_vwap(&session.events, parent.start_ns, parent.interval_ns, parent.steps) {
        Ok((p, _)) => Some(p * tick),
        Err(MarketDataError::NoTrades) => None,
        Err(e) => return Err(e.into()),
    };

    Ok(EpisodeResult {
        policy,
        side,
        total_shares,
        fills,
        steps,
        epsilon,
        schedule: path,
        p0: mids[0],
        mids,
        p_fwap,
        p_swap,
        p_vwap,
        completion: q_end / total,
    })
}
