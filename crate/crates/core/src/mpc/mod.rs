//! The per-step allocation problem, its solver and a brute-force oracle.

pub mod oracle;
pub mod problem;
pub mod solver;

pub use oracle::{grid_slack, oracle_solve};
pub use problem::{ControlVector, Expansion, MpcParams, MpcProblem, Violations, FEAS_TOL, SLACK_PENALTY};
pub use solver::{solve, BarrierSolver, SolverOptions};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MpcError {
    #[error("dimension mismatch: c {c}, pi {pi}, sigma {sigma:?}, mask {mask}")]
    DimensionMismatch {
        c: usize,
        pi: usize,
        sigma: (usize, usize),
        mask: usize,
    },
    #[error("invalid problem: {0}")]
    InvalidParameter(String),
    #[error("problem is infeasible")]
    Infeasible,
    #[error("numerical failure: {0}")]
    NumericalFailure(String),
    #[error("oracle limited to {max} candidates, got {0}", max = oracle::MAX_ORACLE_DIM)]
    DimensionTooLarge(usize),
}
