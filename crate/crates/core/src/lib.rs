//! Model-predictive-control trade execution over a simulated L3 order book.
//!
//! At every decision step the policy builds a ladder of candidate child
//! orders (one market order plus increasingly passive limits), models their
//! fill probabilities and fill covariance, and solves a small convex program
//! that trades expected trading cost against deviation from a TWAP, VWAP or
//! Almgren-Chriss schedule, with a rollout estimate for the cost of whatever
//! is left. Orders then run through an event-driven book simulator with
//! queue-position fills and submission latency.
//!
//! Module map:
//!
//! - [`orderbook`]: book reconstruction and shadow-order fills
//! - [`marketdata`]: `.l3e` event files, the synthetic market generator, VWAP
//! - [`schedule`]: target cumulative position per step
//! - [`models`]: candidate ladder, fill probability/covariance, costs
//! - [`mpc`]: the per-step optimization problem, its solver and a grid oracle
//! - [`exec`]: policies and the parent-order episode loop
//! - [`metrics`]: slippage metrics and deviation statistics
//! - [`harness`]: run configuration, fleets, sweeps and CSV reports

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod exec;
pub mod harness;
pub mod marketdata;
pub mod metrics;
pub mod models;
pub mod mpc;
pub mod orderbook;
pub mod schedule;
