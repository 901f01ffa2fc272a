use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use super::MpcError;

/// Weight on the lower-tube slack.
pub const SLACK_PENALTY: f64 = 1e6;
/// Constraint tolerance, in percent of the parent.
pub const FEAS_TOL: f64 = 1e-8;

/// Tunable weights and limits. Quantities are in percent of the parent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcParams {
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub rho_upper: f64,
    pub rho_lower: f64,
}

impl Default for MpcParams {
    fn default() -> Self {
        MpcParams {
            gamma: 1.0,
            beta: 5.0,
            kappa: 50.0,
            rho_upper: 15.0,
            rho_lower: 15.0,
        }
    }
}

/// One decision step:
///
/// ```text
/// minimize   (c ∘ π)'u + γ (q + π'u - s)² + ξ (Q - q - π'u) + M σ
/// subject to 0 <= u <= κ
///            q + 1'u <= s + ρ_upper
///            q + m'u + σ >= s - ρ_lower,  σ >= 0
///            u'Σu <= β
/// ```
///
/// where `m` marks the guaranteed-fill candidates and `M` is
/// [`SLACK_PENALTY`].
#[derive(Debug, Clone, PartialEq)]
pub struct MpcProblem {
    pub c: Vec<f64>,
    pub pi: Vec<f64>,
    pub sigma: DMatrix<f64>,
    pub q: f64,
    pub s_next: f64,
    pub total: f64,
    pub gamma: f64,
    pub xi: f64,
    pub kappa: f64,
    pub rho_upper: f64,
    pub rho_lower: f64,
    pub beta: f64,
    pub market_mask: Vec<bool>,
}

/// The objective expanded as `u'Au + b'u + k`.
#[derive(Debug, Clone, PartialEq)]
pub struct Expansion {
    /// `c ∘ π - ξ π + 2 γ (q - s) π`
    pub linear: DVector<f64>,
    /// `γ π π'`
    pub quadratic: DMatrix<f64>,
    /// `γ (q - s)² + ξ (Q - q)`
    pub constant: f64,
}

/// Worst violation of each constraint group at a point; all zero when
/// feasible.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Violations {
    pub box_lower: f64,
    pub box_upper: f64,
    pub upper_tube: f64,
    pub lower_tube: f64,
    pub slack_sign: f64,
    pub variance: f64,
}

impl Violations {
    pub fn max(&self) -> f64 {
        [
            self.box_lower,
            self.box_upper,
            self.upper_tube,
            self.lower_tube,
            self.slack_sign,
            self.variance,
        ]
        .into_iter()
        .fold(0.0, f64::max)
    }

    pub fn within(&self, tol: f64) -> bool {
        self.max() <= tol
    }
}

/// A solution with its diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlVector {
    pub u: Vec<f64>,
    /// Lower-tube slack actually used.
    pub slack: f64,
    /// Predicted deviation after the step, `q + π'u - s`.
    pub m_hat: f64,
    /// Predicted variance of the step's fills, `u'Σu`.
    pub v_hat: f64,
    /// [`MpcProblem::penalized_objective`] at `u`.
    pub objective: f64,
    pub iterations: usize,
}

impl MpcProblem {
    /// Assemble a problem from model outputs and parameters. The upper tube
    /// is clipped so the step can never target more than the whole parent.
    #[allow(clippy::too_many_arguments)]
    pub fn build(
        c: Vec<f64>,
        pi: Vec<f64>,
        sigma: DMatrix<f64>,
        market_mask: Vec<bool>,
        q: f64,
        s_next: f64,
        total: f64,
        xi: f64,
        params: &MpcParams,
    ) -> Result<Self, MpcError> {
        let p = MpcProblem {
            c,
            pi,
            sigma,
            q,
            s_next,
            total,
            gamma: params.gamma,
            xi,
            kappa: params.kappa,
            rho_upper: params.rho_upper.min((total - s_next).max(0.0)),
            rho_lower: params.rho_lower,
            beta: params.beta,
            market_mask,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn d(&self) -> usize {
        self.c.len()
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let d = self.d();
        if self.pi.len() != d
            || self.market_mask.len() != d
            || self.sigma.nrows() != d
            || self.sigma.ncols() != d
        {
            return Err(MpcError::DimensionMismatch {
                c: d,
                pi: self.pi.len(),
                sigma: (self.sigma.nrows(), self.sigma.ncols()),
                mask: self.market_mask.len(),
            });
        }
        let bad = |m: String| Err(MpcError::InvalidParameter(m));
        let finite = self.c.iter().chain(&self.pi).chain(self.sigma.iter()).all(|x| x.is_finite())
            && [self.q, self.s_next, self.total, self.gamma, self.xi, self.kappa, self.rho_upper, self.rho_lower, self.beta]
                .iter()
                .all(|x| x.is_finite());
        if !finite {
            return bad("non-finite input".into());
        }
        if self.gamma < 0.0 || !(self.beta > 0.0) || !(self.kappa > 0.0) {
            return bad(format!("need gamma >= 0, beta > 0, kappa > 0 (got {}, {}, {})", self.gamma, self.beta, self.kappa));
        }
        if self.rho_upper < 0.0 || self.rho_lower < 0.0 {
            return bad("tube widths must be non-negative".into());
        }
        if self.pi.iter().any(|p| !(0.0..=1.0).contains(p)) {
            return bad("fill probabilities must lie in [0, 1]".into());
        }
        for i in 0..d {
            for j in 0..i {
                if (self.sigma[(i, j)] - self.sigma[(j, i)]).abs() > 1e-12 {
                    return bad("covariance is not symmetric".into());
                }
            }
        }
        if d > 0 && SymmetricEigen::new(self.sigma.clone()).eigenvalues.min() < -1e-10 {
            return bad("covariance is not positive semidefinite".into());
        }
        Ok(())
    }

    /// Room left under the upper tube.
    pub fn upper_room(&self) -> f64 {
        self.s_next + self.rho_upper - self.q
    }

    /// Guaranteed-fill quantity needed to reach the lower tube.
    pub fn lower_need(&self) -> f64 {
        self.s_next - self.rho_lower - self.q
    }

    pub fn market_quantity(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.market_mask).filter(|(_, &m)| m).map(|(x, _)| x).sum()
    }

    pub fn expected_fill(&self, u: &[f64]) -> f64 {
        u.iter().zip(&self.pi).map(|(a, b)| a * b).sum()
    }

    pub fn variance(&self, u: &[f64]) -> f64 {
        let v = DVector::from_column_slice(u);
        (v.transpose() * &self.sigma * &v)[(0, 0)]
    }

    /// Smallest slack that makes `u` satisfy the lower tube.
    pub fn slack_for(&self, u: &[f64]) -> f64 {
        (self.lower_need() - self.market_quantity(u)).max(0.0)
    }

    /// The step cost at `u`, without the slack penalty.
    pub fn objective(&self, u: &[f64]) -> f64 {
        let fill = self.expected_fill(u);
        let trading: f64 = u.iter().zip(self.c.iter().zip(&self.pi)).map(|(x, (c, p))| c * p * x).sum();
        let dev = self.q + fill - self.s_next;
        trading + self.gamma * dev * dev + self.xi * (self.total - self.q - fill)
    }

    /// Objective plus the slack penalty at the smallest admissible slack.
    pub fn penalized_objective(&self, u: &[f64]) -> f64 {
        self.objective(u) + SLACK_PENALTY * self.slack_for(u)
    }

    pub fn expansion(&self) -> Expansion {
        let pi = DVector::from_column_slice(&self.pi);
        let off = self.q - self.s_next;
        let linear = DVector::from_fn(self.d(), |i, _| {
            self.c[i] * self.pi[i] - self.xi * self.pi[i] + 2.0 * self.gamma * off * self.pi[i]
        });
        Expansion {
            linear,
            quadratic: &pi * pi.transpose() * self.gamma,
            constant: self.gamma * off * off + self.xi * (self.total - self.q),
        }
    }

    pub fn violations(&self, u: &[f64], slack: f64) -> Violations {
        let sum: f64 = u.iter().sum();
        Violations {
            box_lower: u.iter().map(|x| -x).fold(0.0, f64::max),
            box_upper: u.iter().map(|x| x - self.kappa).fold(0.0, f64::max),
            upper_tube: (self.q + sum - self.s_next - self.rho_upper).max(0.0),
            lower_tube: (self.s_next - self.rho_lower - self.q - self.market_quantity(u) - slack).max(0.0),
            slack_sign: (-slack).max(0.0),
            variance: (self.variance(u) - self.beta).max(0.0),
        }
    }

    pub(crate) fn control(&self, u: Vec<f64>, iterations: usize) -> ControlVector {
        let slack = self.slack_for(&u);
        ControlVector {
            m_hat: self.q + self.expected_fill(&u) - self.s_next,
            v_hat: self.variance(&u),
            objective: self.penalized_objective(&u),
            slack,
            iterations,
            u,
        }
    }
}
