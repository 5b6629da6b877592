//! Solver-agnostic conic programs: a linear objective over linear,
//! second-order-cone and exponential-cone blocks.
//!
//! Complex decision variables are lifted to interleaved `(re, im)` pairs and
//! recorded in a [`VariableMap`] so solutions can be mapped back.

mod clarabel_backend;
mod expr;
mod program;
mod solver;

pub use clarabel_backend::ClarabelSolver;
pub use expr::AffineExpr;
pub use program::{
    ComplexBlock, ComplexGroup, ConicProgram, ConstraintBlock, ProgramBuilder, VariableMap,
};
pub use solver::{
    solve, solve_with, solver_registry, ConicSolver, Solution, SolveStatus, DEFAULT_SOLVER,
    DEFAULT_TOL,
};

use std::f64::consts::LN_2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ConicError {
    #[error("malformed program: {0}")]
    InvalidProgram(String),
    #[error("tolerance {0} outside [1e-10, 1e-4]")]
    Tolerance(f64),
    #[error("solver backend error: {0}")]
    Backend(String),
    #[error(transparent)]
    UnknownSolver(#[from] crate::registry::UnknownStrategy),
}

/// Encodes `r <= B * (log2(1 + q) - penalty * u)` through an auxiliary
/// `t` with `(t, 1, 1 + q)` in the exponential cone (`t <= ln(1 + q)`) and
/// the linear row `r - B * (t / ln 2 - penalty * u) <= 0`.
///
/// With `u = None` the dispersion term is omitted entirely. Returns the
/// index of `t`.
pub fn log_rate_epigraph(
    builder: &mut ProgramBuilder,
    q_index: usize,
    r_index: usize,
    u_index: Option<usize>,
    bandwidth: f64,
    omega_over_sqrt_eta: f64,
) -> usize {
    log_rate_epigraph_scaled(
        builder,
        q_index,
        1.0,
        r_index,
        u_index,
        bandwidth,
        omega_over_sqrt_eta,
    )
}

/// [`log_rate_epigraph`] where the program variable at `q_index` holds
/// `q / q_scale`.
pub fn log_rate_epigraph_scaled(
    builder: &mut ProgramBuilder,
    q_index: usize,
    q_scale: f64,
    r_index: usize,
    u_index: Option<usize>,
    bandwidth: f64,
    omega_over_sqrt_eta: f64,
) -> usize {
    let t = builder.add_var(format!("t[{q_index}]"));
    builder.push(
        ConstraintBlock::ExponentialCone([
            AffineExpr::var(t),
            AffineExpr::constant(1.0),
            AffineExpr::term(q_index, q_scale) + 1.0,
        ]),
        "log1p",
    );
    let mut row = AffineExpr::var(r_index) - AffineExpr::term(t, bandwidth / LN_2);
    if let Some(u) = u_index {
        row = row + AffineExpr::term(u, bandwidth * omega_over_sqrt_eta);
    }
    builder.push(ConstraintBlock::Inequality(vec![row]), "rate");
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    fn max_rate(q: f64, u: f64, bandwidth: f64, pen: f64, r_nonneg: bool) -> Solution {
        let mut b = ProgramBuilder::new();
        let qi = b.add_var("q");
        let ri = b.add_var("r");
        let ui = b.add_var("u");
        b.set_bounds(qi, q, q);
        b.set_bounds(ui, u, u);
        if r_nonneg {
            b.set_bounds(ri, 0.0, f64::INFINITY);
        }
        log_rate_epigraph(&mut b, qi, ri, Some(ui), bandwidth, pen);
        b.add_objective_term(ri, -1.0);
        solve(&b.build().unwrap(), DEFAULT_TOL).unwrap()
    }

    #[test]
    fn epigraph_log2_two() {
        let s = max_rate(1.0, 0.0, 1.0, 0.7, false);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.primal.unwrap()[1] - 1.0).abs() < 1e-6);
    }

    #[test]
    fn epigraph_zero_sinr() {
        let s = max_rate(0.0, 0.3, 1.0, 0.5, true);
        // r <= -0.15 contradicts r >= 0
        assert_eq!(s.status, SolveStatus::Infeasible);
        let s = max_rate(0.0, 0.0, 1.0, 0.5, true);
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!(s.primal.unwrap()[1].abs() < 1e-6);
    }

    #[test]
    fn epigraph_closed_form_boundary() {
        // log2(4) - 0.2 * 0.5 = 1.9
        let s = max_rate(3.0, 0.5, 1.0, 0.2, false);
        assert!((s.primal.unwrap()[1] - 1.9).abs() < 1e-6);
        let s = max_rate(3.0, 0.5, 2.0, 0.2, false);
        assert!((s.primal.unwrap()[1] - 3.8).abs() < 1e-6);
    }
}
