//! Brute-force reference solver for small instances.
//!
//! The first candidate is eliminated exactly (for fixed values of the others
//! the objective is a kinked quadratic on an interval). The remaining
//! candidates are searched exhaustively on a grid over the feasible box, then
//! by a local grid walk that refines tenfold each time the incumbent settles,
//! then by line searches along coordinate and pairwise directions. Only
//! intended for checking the barrier solver, so it favors simplicity over
//! speed.

use super::problem::{ControlVector, MpcProblem, SLACK_PENALTY};
use super::MpcError;

pub const MAX_ORACLE_DIM: usize = 4;
const GRID_BUDGET: f64 = 200_000.0;
/// Half-width of the local search window, in grid steps.
const WINDOW: f64 = 4.0;
const MAX_SWEEPS: usize = 200;

pub fn oracle_solve(p: &MpcProblem, grid_step: f64) -> Result<ControlVector, MpcError> {
    p.validate()?;
    let d = p.d();
    if d > MAX_ORACLE_DIM {
        return Err(MpcError::DimensionTooLarge(d));
    }
    if !(grid_step > 0.0) {
        return Err(MpcError::InvalidParameter(format!("grid step {grid_step}")));
    }
    let room = p.upper_room();
    if d == 0 || room <= 0.0 {
        return Ok(p.control(vec![0.0; d], 0));
    }
    let ub = p.kappa.min(room);
    let zero = vec![0.0; d];
    if d == 1 {
        let (_, u) = eliminate(p, &[]).unwrap_or((0.0, zero));
        return Ok(p.control(u, 1));
    }

    // Grid over coordinates 1..d; coordinate 0 is minimized exactly at each
    // grid point.
    let k = d - 1;
    let per_dim = GRID_BUDGET.powf(1.0 / k as f64).floor().max(3.0);
    let mut h = (ub / (per_dim - 1.0)).max(grid_step);
    let axes: Vec<Vec<f64>> = (0..k).map(|_| axis(0.0, ub, 0.0, ub, h)).collect();
    let mut best = search(p, &axes).unwrap_or((p.penalized_objective(&zero), zero));
    let mut rounds = 1;
    loop {
        // Walk the window until the incumbent stops moving, then refine.
        for _ in 0..1000 {
            let axes: Vec<Vec<f64>> = best.1[1..]
                .iter()
                .map(|&b| axis(b - WINDOW * h, b + WINDOW * h, 0.0, ub, h))
                .collect();
            rounds += 1;
            match search(p, &axes) {
                Some(cand) if cand.0 < best.0 => best = cand,
                _ => break,
            }
        }
        if h <= grid_step {
            break;
        }
        h = (h / 10.0).max(grid_step);
    }
    rounds += polish(p, &mut best);
    Ok(p.control(best.1, rounds))
}

/// Allowance for the oracle's discretization at its solution: the first-order
/// change of the penalized objective over one grid step in every coordinate.
pub fn grid_slack(p: &MpcProblem, u: &[f64], grid_step: f64) -> f64 {
    let dev = p.q + p.expected_fill(u) - p.s_next;
    let active = p.slack_for(u) > 0.0;
    (0..p.d())
        .map(|i| {
            let smooth = p.c[i] * p.pi[i] + 2.0 * p.gamma * dev * p.pi[i] - p.xi * p.pi[i];
            let kink = if p.market_mask[i] && active { SLACK_PENALTY } else { 0.0 };
            smooth.abs() + kink
        })
        .sum::<f64>()
        * grid_step
}

/// Points `lo, lo + h, ...` clipped to `[min, max]`, always including the
/// clipped endpoints.
fn axis(lo: f64, hi: f64, min: f64, max: f64, h: f64) -> Vec<f64> {
    let (lo, hi) = (lo.max(min), hi.min(max));
    let n = ((hi - lo) / h).floor() as usize;
    let mut pts: Vec<f64> = (0..=n).map(|k| lo + k as f64 * h).collect();
    if hi - pts[n] > 1e-12 {
        pts.push(hi);
    }
    pts
}

/// Feasibility with a round-off allowance far inside the reporting
/// tolerance, so points on an active boundary are not rejected.
fn feasible(p: &MpcProblem, u: &[f64]) -> bool {
    const EPS: f64 = 1e-12;
    u.iter().sum::<f64>() <= p.upper_room() + EPS && p.variance(u) <= p.beta + EPS
}

/// Best point over the product grid `axes` (coordinates 1..d), with
/// coordinate 0 eliminated exactly.
fn search(p: &MpcProblem, axes: &[Vec<f64>]) -> Option<(f64, Vec<f64>)> {
    let k = axes.len();
    let mut idx = vec![0usize; k];
    let mut rest: Vec<f64> = axes.iter().map(|a| a[0]).collect();
    let mut best: Option<(f64, Vec<f64>)> = None;
    loop {
        if let Some((f, u)) = eliminate(p, &rest) {
            if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
                best = Some((f, u));
            }
        }
        // odometer increment
        let mut j = 0;
        loop {
            if j == k {
                return best;
            }
            idx[j] += 1;
            if idx[j] < axes[j].len() {
                rest[j] = axes[j][idx[j]];
                break;
            }
            idx[j] = 0;
            rest[j] = axes[j][0];
            j += 1;
        }
    }
}

/// Exact minimum over coordinate 0 with coordinates 1..d fixed to `rest`.
fn eliminate(p: &MpcProblem, rest: &[f64]) -> Option<(f64, Vec<f64>)> {
    let d = p.d();
    let mut u = vec![0.0; d];
    u[1..].copy_from_slice(rest);
    let mut e0 = vec![0.0; d];
    e0[0] = 1.0;
    line_argmin(p, &u, &e0)
}

/// Range of `tau` keeping `u + tau v` feasible.
fn line_interval(p: &MpcProblem, u: &[f64], v: &[f64]) -> Option<(f64, f64)> {
    let (mut lo, mut hi) = (f64::NEG_INFINITY, f64::INFINITY);
    let mut clip = |a: f64, b: f64| {
        // a + b tau <= 0
        if b > 0.0 {
            hi = hi.min(-a / b);
        } else if b < 0.0 {
            lo = lo.max(-a / b);
        } else if a > 0.0 {
            hi = f64::NEG_INFINITY;
        }
    };
    for (x, dv) in u.iter().zip(v) {
        clip(-x, -dv);
        clip(x - p.kappa, *dv);
    }
    clip(u.iter().sum::<f64>() - p.upper_room(), v.iter().sum());
    let (mut lo, mut hi) = (lo, hi);
    // variance: a tau² + 2 b tau + c <= 0
    let a = p.variance(v);
    let b: f64 = (0..p.d()).map(|i| (0..p.d()).map(|j| u[i] * p.sigma[(i, j)] * v[j]).sum::<f64>()).sum();
    let c = p.variance(u) - p.beta;
    if a > 0.0 {
        let disc = b * b - a * c;
        if disc < 0.0 {
            return None;
        }
        let r = disc.sqrt();
        lo = lo.max((-b - r) / a);
        hi = hi.min((-b + r) / a);
    } else if b > 0.0 {
        hi = hi.min(-c / (2.0 * b));
    } else if b < 0.0 {
        lo = lo.max(-c / (2.0 * b));
    } else if c > 0.0 {
        return None;
    }
    (lo <= hi).then_some((lo, hi))
}

/// Exact minimization of the penalized objective along `u + tau v`. The
/// objective is a quadratic in `tau` with at most one kink, so the minimum is
/// at an endpoint, the kink, or a stationary point of either piece.
fn line_argmin(p: &MpcProblem, u: &[f64], v: &[f64]) -> Option<(f64, Vec<f64>)> {
    let (lo, hi) = line_interval(p, u, v)?;
    let pv = p.expected_fill(v);
    let mv = p.market_quantity(v);
    let dev = p.q + p.expected_fill(u) - p.s_next;
    let quad = p.gamma * pv * pv;
    let slope: f64 = v.iter().enumerate().map(|(i, x)| p.c[i] * p.pi[i] * x).sum::<f64>()
        + 2.0 * p.gamma * dev * pv
        - p.xi * pv;
    let mut taus = vec![lo, hi, 0.0];
    if mv != 0.0 {
        taus.push((p.lower_need() - p.market_quantity(u)) / mv);
    }
    if quad > 0.0 {
        taus.push(-slope / (2.0 * quad));
        taus.push(-(slope - SLACK_PENALTY * mv) / (2.0 * quad));
    }
    let mut best: Option<(f64, Vec<f64>)> = None;
    for tau in taus {
        let tau = tau.clamp(lo, hi);
        let w: Vec<f64> = u.iter().zip(v).map(|(x, dv)| (x + tau * dv).clamp(0.0, p.kappa)).collect();
        if !feasible(p, &w) {
            continue;
        }
        let f = p.penalized_objective(&w);
        if best.as_ref().is_none_or(|(bf, _)| f < *bf) {
            best = Some((f, w));
        }
    }
    best
}

/// Golden-section searches of the eliminated objective along every
/// coordinate and pairwise direction among coordinates 1..d. The eliminated
/// objective is convex, so each search is exact up to its bracket width.
/// Returns sweeps made.
fn polish(p: &MpcProblem, best: &mut (f64, Vec<f64>)) -> usize {
    let d = p.d();
    let mut dirs = Vec::new();
    for i in 1..d {
        let mut e = vec![0.0; d];
        e[i] = 1.0;
        dirs.push(e);
        for j in 1..i {
            let mut e = vec![0.0; d];
            e[i] = 1.0;
            e[j] = -1.0;
            dirs.push(e.clone());
            e[j] = 1.0;
            dirs.push(e);
        }
    }
    for sweep in 1..=MAX_SWEEPS {
        let start = best.0;
        for v in &dirs {
            let mut base = best.1.clone();
            base[0] = 0.0;
            let Some((lo, hi)) = line_interval(p, &base, v) else {
                continue;
            };
            let g = |tau: f64| -> Option<(f64, Vec<f64>)> {
                let rest: Vec<f64> = base[1..].iter().zip(&v[1..]).map(|(x, dv)| (x + tau * dv).max(0.0)).collect();
                eliminate(p, &rest)
            };
            let value = |tau: f64| g(tau).map_or(f64::INFINITY, |(f, _)| f);
            let (mut a, mut b) = (lo, hi);
            let r = (5f64.sqrt() - 1.0) / 2.0;
            let (mut x1, mut x2) = (b - r * (b - a), a + r * (b - a));
            let (mut f1, mut f2) = (value(x1), value(x2));
            for _ in 0..120 {
                if f1 <= f2 {
                    b = x2;
                    (x2, f2) = (x1, f1);
                    x1 = b - r * (b - a);
                    f1 = value(x1);
                } else {
                    a = x1;
                    (x1, f1) = (x2, f2);
                    x2 = a + r * (b - a);
                    f2 = value(x2);
                }
            }
            for tau in [lo, hi, a, b, x1, x2] {
                if let Some((f, u)) = g(tau) {
                    if f < best.0 {
                        *best = (f, u);
                    }
                }
            }
        }
        boundary_walk(p, &dirs, best);
        if start - best.0 <= 1e-15 * start.abs().max(1.0) {
            return sweep;
        }
    }
    MAX_SWEEPS
}

/// Compass search in which every trial point is pulled back toward the
/// origin onto the variance ellipsoid. Straight lines leave a curved active
/// boundary at once, so without this the search stalls wherever the gradient
/// is mostly normal to it.
fn boundary_walk(p: &MpcProblem, dirs: &[Vec<f64>], best: &mut (f64, Vec<f64>)) {
    let mut step = p.kappa.min(p.upper_room()) / 10.0;
    while step > 1e-13 {
        let mut moved = false;
        for v in dirs {
            for sign in [1.0, -1.0] {
                let mut u: Vec<f64> = best.1.iter().zip(v).map(|(x, dv)| (x + sign * step * dv).clamp(0.0, p.kappa)).collect();
                u[0] = 0.0;
                let var = p.variance(&u);
                if var > p.beta {
                    let k = (p.beta / var).sqrt();
                    u.iter_mut().for_each(|x| *x *= k);
                }
                if let Some(cand) = eliminate(p, &u[1..]) {
                    if cand.0 < best.0 {
                        *best = cand;
                        moved = true;
                    }
                }
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mpc::problem::MpcParams;
    use nalgebra::DMatrix;

    #[test]
    fn axis_includes_endpoints() {
        assert_eq!(axis(0.0, 1.0, 0.0, 1.0, 0.3), vec![0.0, 0.3, 0.6, 0.8999999999999999, 1.0]);
        assert_eq!(axis(-1.0, 0.5, 0.0, 10.0, 0.25), vec![0.0, 0.25, 0.5]);
    }

    #[test]
    fn too_large() {
        let d = 5;
        let p = MpcProblem::build(
            vec![0.0; d],
            vec![1.0; d],
            DMatrix::zeros(d, d),
            vec![true; d],
            0.0,
            1.0,
            100.0,
            0.5,
            &MpcParams::default(),
        )
        .unwrap();
        assert_eq!(oracle_solve(&p, 1e-3), Err(MpcError::DimensionTooLarge(5)));
    }
}
