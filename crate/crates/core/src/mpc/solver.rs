//! Primal log-barrier method for the step problem.
//!
//! Variables are the allocation `u` plus the lower-tube slack. Each centering
//! step is a damped Newton iteration; the Hessian is at most 12x12 for the
//! default ladder, so a dense Cholesky is all the linear algebra needed.

use nalgebra::{DMatrix, DVector};

use super::problem::{ControlVector, MpcProblem, SLACK_PENALTY};
use super::MpcError;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    /// Barrier parameter growth per outer iteration.
    pub mu: f64,
    /// Stop when the duality-gap bound falls below `gap_rel * max(1, |f|)`.
    pub gap_rel: f64,
    /// Newton decrement threshold for centering.
    pub newton_tol: f64,
    /// Total Newton steps before giving up.
    pub max_newton: usize,
    /// Weight of the index tie-break; candidate `i` pays `tie_break * (i + 1)`
    /// per unit.
    pub tie_break: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            mu: 20.0,
            gap_rel: 1e-9,
            newton_tol: 1e-9,
            max_newton: 1000,
            tie_break: 1e-9,
        }
    }
}

const MAX_CENTERING_STEPS: usize = 60;

/// Stateful solver: remembers the last solution as a warm start.
#[derive(Debug, Clone, Default)]
pub struct BarrierSolver {
    pub options: SolverOptions,
    warm: Option<Vec<f64>>,
}

/// Slacks of every inequality at a point, all positive when strictly
/// feasible.
struct Slacks {
    lo: Vec<f64>,
    hi: Vec<f64>,
    upper: f64,
    lower: f64,
    sigma: f64,
    var: f64,
    /// `Σu`, reused for the variance gradient.
    sigma_u: DVector<f64>,
}

struct Instance<'a> {
    p: &'a MpcProblem,
    d: usize,
    pi: DVector<f64>,
    /// Linear coefficients of the objective, tie-break included.
    lin: DVector<f64>,
    mask: DVector<f64>,
    room: f64,
    need: f64,
}

impl<'a> Instance<'a> {
    fn new(p: &'a MpcProblem, tie_break: f64) -> Self {
        let d = p.d();
        let e = p.expansion();
        Instance {
            p,
            d,
            pi: DVector::from_column_slice(&p.pi),
            lin: DVector::from_fn(d, |i, _| e.linear[i] + tie_break * (i + 1) as f64),
            mask: DVector::from_fn(d, |i, _| if p.market_mask[i] { 1.0 } else { 0.0 }),
            room: p.upper_room(),
            need: p.lower_need(),
        }
    }

    fn count(&self) -> usize {
        2 * self.d + 4
    }

    fn slacks(&self, x: &DVector<f64>) -> Option<Slacks> {
        let d = self.d;
        let u = x.rows(0, d);
        let sigma = x[d];
        let sigma_u = &self.p.sigma * u;
        let s = Slacks {
            lo: u.iter().copied().collect(),
            hi: u.iter().map(|v| self.p.kappa - v).collect(),
            upper: self.room - u.sum(),
            lower: self.mask.dot(&u) + sigma - self.need,
            sigma,
            var: self.p.beta - u.dot(&sigma_u),
            sigma_u,
        };
        let ok = s.lo.iter().chain(&s.hi).all(|v| *v > 0.0) && s.upper > 0.0 && s.lower > 0.0 && s.sigma > 0.0 && s.var > 0.0;
        ok.then_some(s)
    }

    fn objective(&self, x: &DVector<f64>) -> f64 {
        let u = x.rows(0, self.d);
        let fill = self.pi.dot(&u);
        self.p.gamma * fill * fill + self.lin.dot(&u) + SLACK_PENALTY * x[self.d]
    }

    fn barrier(&self, s: &Slacks) -> f64 {
        -(s.lo.iter().chain(&s.hi).map(|v| v.ln()).sum::<f64>() + s.upper.ln() + s.lower.ln() + s.sigma.ln() + s.var.ln())
    }

    /// Value, gradient and Hessian of `t f + barrier`.
    fn newton_system(&self, x: &DVector<f64>, s: &Slacks, t: f64) -> (DVector<f64>, DMatrix<f64>) {
        let d = self.d;
        let n = d + 1;
        let u = x.rows(0, d);
        let fill = self.pi.dot(&u);
        let mut g = DVector::zeros(n);
        let mut h = DMatrix::zeros(n, n);

        // objective
        for i in 0..d {
            g[i] = t * (2.0 * self.p.gamma * fill * self.pi[i] + self.lin[i]);
            for j in 0..d {
                h[(i, j)] = t * 2.0 * self.p.gamma * self.pi[i] * self.pi[j];
            }
        }
        g[d] = t * SLACK_PENALTY;

        // box
        for i in 0..d {
            g[i] += -1.0 / s.lo[i] + 1.0 / s.hi[i];
            h[(i, i)] += 1.0 / (s.lo[i] * s.lo[i]) + 1.0 / (s.hi[i] * s.hi[i]);
        }
        // upper tube: 1'u <= room
        let w = 1.0 / (s.upper * s.upper);
        for i in 0..d {
            g[i] += 1.0 / s.upper;
            for j in 0..d {
                h[(i, j)] += w;
            }
        }
        // lower tube: m'u + sigma >= need
        let a = DVector::from_fn(n, |i, _| if i < d { self.mask[i] } else { 1.0 });
        g -= &a / s.lower;
        h += &a * a.transpose() / (s.lower * s.lower);
        // slack sign
        g[d] -= 1.0 / s.sigma;
        h[(d, d)] += 1.0 / (s.sigma * s.sigma);
        // variance: u'Σu <= beta
        let grad_var = &s.sigma_u * 2.0;
        for i in 0..d {
            g[i] += grad_var[i] / s.var;
            for j in 0..d {
                h[(i, j)] += grad_var[i] * grad_var[j] / (s.var * s.var) + 2.0 * self.p.sigma[(i, j)] / s.var;
            }
        }
        (g, h)
    }

    /// First barrier weight: `m` over a bound on the starting suboptimality,
    /// so the first center sits well inside the feasible set instead of
    /// pressed against curved active boundaries.
    fn initial_t(&self, x: &DVector<f64>) -> f64 {
        let d = self.d;
        let u = x.rows(0, d);
        let fill = self.pi.dot(&u);
        let steepest = (0..d)
            .map(|i| (2.0 * self.p.gamma * fill * self.pi[i] + self.lin[i]).abs())
            .fold(0.0, f64::max);
        // The slack term is linear and leaves the barrier quickly; counting
        // its penalty here only slows every solve down.
        let bound = steepest * self.room.min(d as f64 * self.p.kappa);
        (self.count() as f64 / bound.max(1.0)).min(1.0)
    }

    /// A strictly feasible point, preferring a blend of `warm` with the
    /// default interior point.
    fn start(&self, warm: Option<&[f64]>) -> DVector<f64> {
        let d = self.d;
        let ones_var = self.p.sigma.sum();
        let mut level = (self.p.kappa / 2.0).min(self.room / (2.0 * d as f64));
        if ones_var > 0.0 {
            level = level.min((self.p.beta / (2.0 * ones_var)).sqrt());
        }
        let base = DVector::from_element(d, level);
        let with_sigma = |u: DVector<f64>| {
            let sigma = (self.need - self.mask.dot(&u)).max(0.0) + 1.0;
            let mut x = DVector::zeros(d + 1);
            x.rows_mut(0, d).copy_from(&u);
            x[d] = sigma;
            x
        };
        if let Some(w) = warm.filter(|w| w.len() == d) {
            let blended = DVector::from_column_slice(w) * 0.9 + &base * 0.1;
            let x = with_sigma(blended);
            if self.slacks(&x).is_some() {
                return x;
            }
        }
        with_sigma(base)
    }
}

impl BarrierSolver {
    pub fn new(options: SolverOptions) -> Self {
        BarrierSolver { options, warm: None }
    }

    /// Forget the warm start (call between episodes).
    pub fn reset(&mut self) {
        self.warm = None;
    }

    pub fn solve(&mut self, p: &MpcProblem) -> Result<ControlVector, MpcError> {
        p.validate()?;
        let d = p.d();
        // No room under the upper tube: the only admissible allocation is
        // zero.
        if d == 0 || p.upper_room() <= 1e-12 {
            return Ok(p.control(vec![0.0; d], 0));
        }
        let inst = Instance::new(p, self.options.tie_break);
        let mut x = inst.start(self.warm.as_deref());
        let m = inst.count() as f64;
        let mut t = inst.initial_t(&x);
        let mut iterations = 0;
        loop {
            iterations += self.center(&inst, &mut x, t)?;
            if iterations > self.options.max_newton {
                return Err(MpcError::NumericalFailure("Newton iteration limit".into()));
            }
            let f = inst.objective(&x);
            if m / t <= self.options.gap_rel * f.abs().max(1.0) {
                break;
            }
            t *= self.options.mu;
        }

        let mut u: Vec<f64> = x.rows(0, d).iter().copied().collect();
        self.snap_zeros(p, &mut u);
        self.warm = Some(u.clone());
        Ok(p.control(u, iterations))
    }

    /// Minimize `t f + barrier` from `x`; returns Newton steps taken.
    fn center(&self, inst: &Instance, x: &mut DVector<f64>, t: f64) -> Result<usize, MpcError> {
        let mut steps = 0;
        loop {
            let s = inst.slacks(x).ok_or_else(|| MpcError::NumericalFailure("left the interior".into()))?;
            let (g, h) = inst.newton_system(x, &s, t);
            let dx = newton_step(&h, &g)?;
            let decrement = -g.dot(&dx);
            // Late in the path round-off can keep the decrement from ever
            // reaching the tolerance; the step cap bounds that.
            if decrement / 2.0 <= self.options.newton_tol || steps >= MAX_CENTERING_STEPS {
                return Ok(steps);
            }
            steps += 1;
            let value = t * inst.objective(x) + inst.barrier(&s);
            let mut alpha = 1.0;
            let mut accepted = false;
            for _ in 0..80 {
                let trial = &*x + &dx * alpha;
                if let Some(ts) = inst.slacks(&trial) {
                    let tv = t * inst.objective(&trial) + inst.barrier(&ts);
                    if tv <= value - 0.01 * alpha * decrement {
                        *x = trial;
                        accepted = true;
                        break;
                    }
                }
                alpha *= 0.5;
            }
            if !accepted {
                // No measurable progress left at this precision.
                return Ok(steps);
            }
        }
    }

    /// Interior points never reach the boundary; push negligible allocations
    /// to exactly zero when that does not hurt.
    fn snap_zeros(&self, p: &MpcProblem, u: &mut [f64]) {
        let tie = |u: &[f64]| -> f64 {
            p.penalized_objective(u)
                + u.iter().enumerate().map(|(i, x)| self.options.tie_break * (i + 1) as f64 * x).sum::<f64>()
        };
        for i in 0..u.len() {
            if u[i] == 0.0 || u[i] > 1e-7 {
                continue;
            }
            let before = tie(u);
            let keep = u[i];
            u[i] = 0.0;
            if tie(u) > before || p.variance(u) > p.beta {
                u[i] = keep;
            }
        }
    }
}

fn newton_step(h: &DMatrix<f64>, g: &DVector<f64>) -> Result<DVector<f64>, MpcError> {
    // Barrier curvature spans many orders of magnitude (the slack alone can
    // reach 1e14), so factor the Jacobi-scaled system D H D with D = diag(H)^-1/2.
    let d = h.diagonal().map(|v| 1.0 / v.max(f64::MIN_POSITIVE).sqrt());
    let scaled = DMatrix::from_fn(h.nrows(), h.ncols(), |i, j| h[(i, j)] * d[i] * d[j]);
    let rhs = g.component_mul(&d);
    for k in [0.0, 1e-14, 1e-12, 1e-10, 1e-8] {
        let ridged = &scaled + DMatrix::identity(h.nrows(), h.ncols()) * k;
        if let Some(ch) = ridged.cholesky() {
            return Ok(-ch.solve(&rhs).component_mul(&d));
        }
    }
    Err(MpcError::NumericalFailure("Hessian not positive definite".into()))
}

/// Solve once without a warm start.
pub fn solve(p: &MpcProblem) -> Result<ControlVector, MpcError> {
    BarrierSolver::default().solve(p)
}
