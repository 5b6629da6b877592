use std::sync::OnceLock;

use serde::Serialize;

use super::{ClarabelSolver, ConicError, ConicProgram};
use crate::registry::Registry;

pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_SOLVER: &str = "clarabel";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    Unbounded,
    NumericalFailure,
    IterationLimit,
}

impl SolveStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            SolveStatus::Optimal => "optimal",
            SolveStatus::Infeasible => "infeasible",
            SolveStatus::Unbounded => "unbounded",
            SolveStatus::NumericalFailure => "numerical_failure",
            SolveStatus::IterationLimit => "iteration_limit",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub status: SolveStatus,
    /// Present for `Optimal`, and for `IterationLimit` as the best iterate.
    pub primal: Option<Vec<f64>>,
    /// NaN when no primal is available.
    pub objective_value: f64,
    pub solve_time_s: f64,
    pub iterations: u32,
    /// Largest relative violation of `primal`, measured from the program.
    pub max_violation: f64,
}

impl Solution {
    pub fn without_primal(status: SolveStatus, solve_time_s: f64, iterations: u32) -> Self {
        Self {
            status,
            primal: None,
            objective_value: f64::NAN,
            solve_time_s,
            iterations,
            max_violation: f64::NAN,
        }
    }

    pub fn is_optimal(&self) -> bool {
        self.status == SolveStatus::Optimal
    }
}

pub trait ConicSolver: Send + Sync {
    fn name(&self) -> &str;

    /// Solves `program` to tolerance `tol`. An `Optimal` status must come
    /// with a primal that passes [`ConicProgram::max_violation`] at `tol`.
    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<Solution, ConicError>;
}

pub(crate) fn check_tol(tol: f64) -> Result<(), ConicError> {
    if (1e-10..=1e-4).contains(&tol) {
        Ok(())
    } else {
        Err(ConicError::Tolerance(tol))
    }
}

pub fn solver_registry() -> &'static Registry<dyn ConicSolver> {
    static REGISTRY: OnceLock<Registry<dyn ConicSolver>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn ConicSolver> = Registry::new("conic solver");
        r.register(
            DEFAULT_SOLVER,
            Box::new(|| Box::new(ClarabelSolver::default()) as Box<dyn ConicSolver>),
        );
        r
    })
}

/// Solves with the default backend.
pub fn solve(program: &ConicProgram, tol: f64) -> Result<Solution, ConicError> {
    ClarabelSolver::default().solve(program, tol)
}

pub fn solve_with(name: &str, program: &ConicProgram, tol: f64) -> Result<Solution, ConicError> {
    solver_registry().create(name)?.solve(program, tol)
}
