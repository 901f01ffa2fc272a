use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::models::{
    build_ladder, fill_covariance, push_mid_ioc, rollout_cost, trading_cost, CandidateOrder, FillProbability,
    LinearFillModel, OrderKind, Quote, RolloutMode,
};
use crate::mpc::{BarrierSolver, ControlVector, MpcParams, MpcProblem, Violations};
use crate::orderbook::Side;

use super::ExecError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Cross the spread for the scheduled quantity every step.
    Crossing,
    Mpc,
    /// MPC with the hindsight close as rollout cost.
    MpcOracle,
}

impl PolicyKind {
    pub fn name(self) -> &'static str {
        match self {
            PolicyKind::Crossing => "crossing",
            PolicyKind::Mpc => "mpc",
            PolicyKind::MpcOracle => "mpc-oracle",
        }
    }

    pub fn rollout(self) -> Option<RolloutMode> {
        match self {
            PolicyKind::Crossing => None,
            PolicyKind::Mpc => Some(RolloutMode::Default),
            PolicyKind::MpcOracle => Some(RolloutMode::Oracle),
        }
    }
}

impl std::fmt::Display for PolicyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for PolicyKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "crossing" => Ok(PolicyKind::Crossing),
            "mpc" => Ok(PolicyKind::Mpc),
            "mpc-oracle" => Ok(PolicyKind::MpcOracle),
            other => Err(format!("unknown policy {other:?} (crossing, mpc, mpc-oracle)")),
        }
    }
}

/// How the tube half-widths shrink over the episode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TubeDecay {
    /// Constant, then zero on the last step.
    #[default]
    Step,
    /// Linear from the configured width at `t = 0` to zero on the last step.
    Linear,
}

impl TubeDecay {
    pub fn scale(self, t: usize, steps: usize) -> f64 {
        if t + 1 >= steps {
            return 0.0;
        }
        match self {
            TubeDecay::Step => 1.0,
            TubeDecay::Linear => (steps - 1 - t) as f64 / (steps - 1) as f64,
        }
    }
}

/// Optimizer settings. Defaults are the baseline simulation parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MpcConfig {
    pub gamma: f64,
    pub beta: f64,
    pub kappa: f64,
    pub rho_upper: f64,
    pub rho_lower: f64,
    /// Rollout cost per share in spreads for the default base policy.
    pub xi: f64,
    /// Ladder size: one market order plus `candidates - 1` limits.
    pub candidates: usize,
    pub tube: TubeDecay,
    /// Add a mid-point IOC candidate to the ladder.
    pub mid_ioc: bool,
    pub fill_model: LinearFillModel,
}

impl Default for MpcConfig {
    fn default() -> Self {
        let p = MpcParams::default();
        MpcConfig {
            gamma: p.gamma,
            beta: p.beta,
            kappa: p.kappa,
            rho_upper: p.rho_upper,
            rho_lower: p.rho_lower,
            xi: 0.5,
            candidates: 11,
            tube: TubeDecay::Step,
            mid_ioc: false,
            fill_model: LinearFillModel::default(),
        }
    }
}

impl MpcConfig {
    pub fn params(&self) -> MpcParams {
        MpcParams {
            gamma: self.gamma,
            beta: self.beta,
            kappa: self.kappa,
            rho_upper: self.rho_upper,
            rho_lower: self.rho_lower,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let p = self.params();
        if !(p.gamma >= 0.0 && p.beta > 0.0 && p.kappa > 0.0 && p.rho_upper >= 0.0 && p.rho_lower >= 0.0) {
            return Err(format!("need gamma >= 0, beta > 0, kappa > 0, rho >= 0: {p:?}"));
        }
        if !self.xi.is_finite() {
            return Err("xi must be finite".into());
        }
        if self.candidates < 2 {
            return Err(format!("need at least 2 candidates, got {}", self.candidates));
        }
        let f = self.fill_model;
        if ![f.top, f.bottom, f.mid_ioc].iter().all(|p| (0.0..=1.0).contains(p)) {
            return Err("fill probabilities must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// What a policy wants to submit this step, in percent of the parent.
#[derive(Debug, Clone)]
pub struct Decision {
    pub ladder: Vec<CandidateOrder>,
    pub u: Vec<f64>,
    /// Only for optimizing policies.
    pub solved: Option<Solved>,
}

#[derive(Debug, Clone)]
pub struct Solved {
    pub problem: MpcProblem,
    pub control: ControlVector,
    pub violations: Violations,
    pub solve_ns: u64,
}

/// One market order for whatever the schedule says we are behind.
pub fn crossing_policy(q: f64, s_next: f64) -> Decision {
    Decision {
        ladder: vec![CandidateOrder {
            index: 0,
            kind: OrderKind::Market,
            price: None,
            venue: "sim".into(),
        }],
        u: vec![(s_next - q).max(0.0)],
        solved: None,
    }
}

/// Inputs to one optimizing decision.
#[derive(Debug, Clone, Copy)]
pub struct MpcState {
    pub side: Side,
    pub quote: Quote,
    pub q: f64,
    pub s_next: f64,
    pub total: f64,
    pub t: usize,
    pub steps: usize,
    /// Session close in ticks, for the oracle rollout.
    pub close: Option<f64>,
}

pub fn mpc_policy(
    solver: &mut BarrierSolver,
    state: &MpcState,
    mode: RolloutMode,
    cfg: &MpcConfig,
) -> Result<Decision, ExecError> {
    let side = state.side;
    let mut ladder = build_ladder(side, &state.quote, cfg.candidates)?;
    if cfg.mid_ioc {
        push_mid_ioc(&mut ladder, side, &state.quote)?;
    }
    let pi = cfg.fill_model.probabilities(&ladder);
    let sigma = fill_covariance(&pi);
    let c = trading_cost(&ladder, side, &state.quote)?;
    let xi = match mode {
        RolloutMode::Default => cfg.xi,
        RolloutMode::Oracle => rollout_cost(mode, side, state.quote.mid()?, state.quote.spread()?, state.close)?,
    };
    let scale = cfg.tube.scale(state.t, state.steps);
    let params = MpcParams {
        rho_upper: cfg.rho_upper * scale,
        rho_lower: cfg.rho_lower * scale,
        ..cfg.params()
    };
    let mask = ladder.iter().map(CandidateOrder::is_market).collect();
    let problem = MpcProblem::build(c, pi, sigma, mask, state.q, state.s_next, state.total, xi, &params)?;
    let started = Instant::now();
    let control = solver.solve(&problem)?;
    let solve_ns = started.elapsed().as_nanos() as u64;
    let violations = problem.violations(&control.u, control.slack);
    Ok(Decision {
        u: control.u.clone(),
        ladder,
        solved: Some(Solved {
            problem,
            control,
            violations,
            solve_ns,
        }),
    })
}
