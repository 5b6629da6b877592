use std::time::Instant;

use clarabel::algebra::CscMatrix;
use clarabel::solver::{DefaultSettings, DefaultSolver, IPSolver, SolverStatus, SupportedConeT};

use super::solver::check_tol;
use super::{
    AffineExpr, ConicError, ConicProgram, ConicSolver, ConstraintBlock, Solution, SolveStatus,
};

/// Interior-point backend for linear, second-order and exponential cones.
#[derive(Debug, Clone)]
pub struct ClarabelSolver {
    pub max_iter: u32,
    /// Tighter re-solves attempted when a reported optimum fails the re-check.
    pub refinements: u32,
}

impl Default for ClarabelSolver {
    fn default() -> Self {
        Self {
            max_iter: 200,
            refinements: 2,
        }
    }
}

#[derive(Default)]
struct Assembly {
    rows: usize,
    ri: Vec<usize>,
    cj: Vec<usize>,
    val: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Assembly {
    /// Appends a row with `a' x + s = rhs`.
    fn row(&mut self, expr: &AffineExpr, sign: f64, rhs: f64) {
        for &(j, c) in &expr.terms {
            self.ri.push(self.rows);
            self.cj.push(j);
            self.val.push(sign * c);
        }
        self.b.push(rhs);
        self.rows += 1;
    }

    /// Slack equals the expression (cone rows and equalities).
    fn cone_row(&mut self, e: &AffineExpr) {
        self.row(e, -1.0, e.constant);
    }

    /// Slack equals the negated expression (`e <= 0`).
    fn le_row(&mut self, e: &AffineExpr) {
        self.row(e, 1.0, -e.constant);
    }

    fn cone(&mut self, cone: SupportedConeT<f64>) {
        use SupportedConeT::*;
        match (self.cones.last_mut(), &cone) {
            (Some(ZeroConeT(n)), ZeroConeT(m))
            | (Some(NonnegativeConeT(n)), NonnegativeConeT(m)) => *n += m,
            _ => self.cones.push(cone),
        }
    }
}

fn assemble(program: &ConicProgram) -> Assembly {
    let mut a = Assembly::default();
    for block in program.constraints() {
        match block {
            ConstraintBlock::Equality(v) => {
                v.iter().for_each(|e| a.cone_row(e));
                a.cone(SupportedConeT::ZeroConeT(v.len()));
            }
            ConstraintBlock::Inequality(v) => {
                v.iter().for_each(|e| a.le_row(e));
                a.cone(SupportedConeT::NonnegativeConeT(v.len()));
            }
            ConstraintBlock::SecondOrderCone { head, tail } => {
                a.cone_row(head);
                tail.iter().for_each(|e| a.cone_row(e));
                a.cone(SupportedConeT::SecondOrderConeT(tail.len() + 1));
            }
            ConstraintBlock::ExponentialCone(e) => {
                e.iter().for_each(|e| a.cone_row(e));
                a.cone(SupportedConeT::ExponentialConeT());
            }
        }
    }
    for (j, &(lo, hi)) in program.bounds().iter().enumerate() {
        if lo == hi {
            a.cone_row(&(AffineExpr::var(j) - AffineExpr::constant(lo)));
            a.cone(SupportedConeT::ZeroConeT(1));
            continue;
        }
        if lo.is_finite() {
            a.le_row(&(AffineExpr::constant(lo) - AffineExpr::var(j)));
            a.cone(SupportedConeT::NonnegativeConeT(1));
        }
        if hi.is_finite() {
            a.le_row(&(AffineExpr::var(j) - AffineExpr::constant(hi)));
            a.cone(SupportedConeT::NonnegativeConeT(1));
        }
    }
    a
}

struct RawResult {
    status: SolverStatus,
    x: Vec<f64>,
    iterations: u32,
}

impl ClarabelSolver {
    fn run(
        &self,
        program: &ConicProgram,
        asm: &Assembly,
        tol: f64,
    ) -> Result<RawResult, ConicError> {
        let n = program.num_vars();
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(j, c) in &program.objective().terms {
            q[j] += c;
        }
        let a = CscMatrix::new_from_triplets(
            asm.rows,
            n,
            asm.ri.clone(),
            asm.cj.clone(),
            asm.val.clone(),
        );
        let settings = DefaultSettings {
            verbose: false,
            max_iter: self.max_iter,
            tol_gap_abs: tol,
            tol_gap_rel: tol,
            tol_feas: tol,
            max_threads: 1,
            presolve_enable: false,
            ..DefaultSettings::default()
        };
        let mut solver = DefaultSolver::new(&p, &q, &a, &asm.b, &asm.cones, settings)
            .map_err(|e| ConicError::Backend(e.to_string()))?;
        solver.solve();
        Ok(RawResult {
            status: solver.solution.status,
            x: solver.solution.x.clone(),
            iterations: solver.solution.iterations,
        })
    }
}

impl ConicSolver for ClarabelSolver {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn solve(&self, program: &ConicProgram, tol: f64) -> Result<Solution, ConicError> {
        check_tol(tol)?;
        program.validate()?;
        let start = Instant::now();
        let asm = assemble(program);
        let mut inner_tol = tol;
        let mut iterations = 0;
        for attempt in 0..=self.refinements {
            let raw = self.run(program, &asm, inner_tol)?;
            iterations += raw.iterations;
            let elapsed = start.elapsed().as_secs_f64();
            let with_primal = |status, x: Vec<f64>| {
                let max_violation = program.max_violation(&x);
                Solution {
                    status,
                    objective_value: program.objective_value(&x),
                    primal: Some(x),
                    solve_time_s: elapsed,
                    iterations,
                    max_violation,
                }
            };
            match raw.status {
                SolverStatus::Solved | SolverStatus::AlmostSolved => {
                    let sol = with_primal(SolveStatus::Optimal, raw.x);
                    if sol.max_violation <= tol && raw.status == SolverStatus::Solved {
                        return Ok(sol);
                    }
                    if attempt == self.refinements {
                        return Ok(if sol.max_violation <= tol {
                            sol
                        } else {
                            Solution::without_primal(
                                SolveStatus::NumericalFailure,
                                elapsed,
                                iterations,
                            )
                        });
                    }
                    inner_tol = (inner_tol * 1e-2).max(1e-14);
                }
                SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => {
                    return Ok(Solution::without_primal(
                        SolveStatus::Infeasible,
                        elapsed,
                        iterations,
                    ))
                }
                SolverStatus::DualInfeasible | SolverStatus::AlmostDualInfeasible => {
                    return Ok(Solution::without_primal(
                        SolveStatus::Unbounded,
                        elapsed,
                        iterations,
                    ))
                }
                SolverStatus::MaxIterations | SolverStatus::MaxTime => {
                    return Ok(with_primal(SolveStatus::IterationLimit, raw.x))
                }
                _ => {
                    return Ok(Solution::without_primal(
                        SolveStatus::NumericalFailure,
                        elapsed,
                        iterations,
                    ))
                }
            }
        }
        unreachable!("refinement loop always returns")
    }
}
