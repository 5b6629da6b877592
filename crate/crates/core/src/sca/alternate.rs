use std::fmt::Write as _;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::Serialize;

use super::subproblem::Extracted;
use super::{
    build_beamforming_subproblem, build_phase_subproblem, project_unit_modulus, Iterate, RateModel,
    ScaError, SubproblemKind, Q_FLOOR,
};
use crate::conic::{solve_with, SolveStatus, DEFAULT_SOLVER, DEFAULT_TOL};
use crate::fbl::dispersion;
use crate::model::{per_ap_power, sinr_all, ChannelSet, Regime, SystemConfig};

pub const CONVERGENCE_THRESHOLD: f64 = 1e-3;
pub const CONVERGENCE_RUN: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopRule {
    /// Run until the coherence budget is spent.
    BudgetOnly,
    /// Also stop once the convergence detector fires.
    BudgetOrConvergence,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlternateOptions {
    pub stop: StopRule,
    pub max_steps: Option<usize>,
    pub solver: String,
    pub tol: f64,
}

impl Default for AlternateOptions {
    fn default() -> Self {
        Self {
            stop: StopRule::BudgetOnly,
            max_steps: None,
            solver: DEFAULT_SOLVER.to_string(),
            tol: DEFAULT_TOL,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub z: usize,
    pub kind: SubproblemKind,
    pub psi: f64,
    pub status: SolveStatus,
    /// Cumulative budget `z * T_calc`.
    pub time_s: f64,
    #[serde(skip)]
    pub solve_time_s: f64,
    /// `max(0, bound(SINR))` at the accepted iterate.
    pub rates_bps: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepFailure {
    pub z: usize,
    pub kind: SubproblemKind,
    pub status: SolveStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlternationTrace {
    pub regime: Regime,
    pub psi_initial: f64,
    pub initial_rates_bps: Vec<f64>,
    pub steps: Vec<StepRecord>,
    pub failure: Option<StepFailure>,
    #[serde(skip)]
    pub final_iterate: Iterate,
}

impl AlternationTrace {
    /// `[Psi_0, Psi_1, ...]`.
    pub fn psi_sequence(&self) -> Vec<f64> {
        std::iter::once(self.psi_initial)
            .chain(self.steps.iter().map(|s| s.psi))
            .collect()
    }

    pub fn convergence_step(&self) -> usize {
        convergence_step(&self.psi_sequence())
    }

    /// Achievable rates at the final iterate.
    pub fn final_rates_bps(&self) -> &[f64] {
        self.steps
            .last()
            .map(|s| s.rates_bps.as_slice())
            .unwrap_or(&self.initial_rates_bps)
    }

    /// Achievable rates after step `z` (`z = 0` is the start point).
    pub fn rates_at(&self, z: usize) -> &[f64] {
        match z {
            0 => &self.initial_rates_bps,
            _ => &self.steps[z - 1].rates_bps,
        }
    }

    pub fn psi_at(&self, z: usize) -> f64 {
        match z {
            0 => self.psi_initial,
            _ => self.steps[z - 1].psi,
        }
    }

    pub fn elapsed_s(&self) -> f64 {
        self.steps.last().map(|s| s.time_s).unwrap_or(0.0)
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("z,kind,psi,status,time_s\n");
        let _ = writeln!(out, "0,start,{},optimal,0", self.psi_initial);
        for s in &self.steps {
            let _ = writeln!(
                out,
                "{},{},{},{},{}",
                s.z,
                s.kind.as_str(),
                s.psi,
                s.status.as_str(),
                s.time_s
            );
        }
        if let Some(f) = &self.failure {
            let _ = writeln!(out, "{},{},,{},", f.z, f.kind.as_str(), f.status.as_str());
        }
        out
    }
}

/// Step after which the adaptation gap stops improving: the step before
/// the first run of [`CONVERGENCE_RUN`] consecutive relative improvements
/// below [`CONVERGENCE_THRESHOLD`]. Without such a run, the last step.
pub fn convergence_step(psi: &[f64]) -> usize {
    let mut run = 0;
    for z in 1..psi.len() {
        let prev = psi[z - 1];
        let small = prev <= 1e-12 || (prev - psi[z]) / prev < CONVERGENCE_THRESHOLD;
        if small {
            run += 1;
            if run == CONVERGENCE_RUN {
                return z - CONVERGENCE_RUN;
            }
        } else {
            run = 0;
        }
    }
    psi.len().saturating_sub(1)
}

fn budget_steps(config: &SystemConfig) -> usize {
    ((config.coherence_time_s / config.per_subproblem_time_s) * (1.0 + 1e-12)).floor() as usize
}

/// Scales any AP block whose power exceeds the budget back onto it.
fn enforce_power(w: &mut DMatrix<Complex64>, l: usize, max_power_w: f64) {
    for (n, p) in per_ap_power(w, l).into_iter().enumerate() {
        if p > max_power_w {
            let s = if p > 0.0 {
                (max_power_w / p).sqrt()
            } else {
                0.0
            };
            w.rows_mut(n * l, l).scale_mut(s);
        }
    }
}

/// Accepts a subproblem solution: keeps the slacks consistent with the true
/// SINRs of the new point, and moves a user's slacks onto its true SINR
/// whenever that does not worsen its gap term.
fn settle(
    prev: &Iterate,
    ext: Extracted,
    channels: &ChannelSet,
    config: &SystemConfig,
    rate: &RateModel,
) -> Iterate {
    let mut w = ext.w.unwrap_or_else(|| prev.w.clone());
    enforce_power(&mut w, channels.antennas_per_ap(), config.max_tx_power_w);
    let v = ext
        .v
        .map(|v| project_unit_modulus(&v))
        .unwrap_or_else(|| prev.v.clone());
    let gammas = sinr_all(channels, &w, &v);
    let targets = &config.rate_targets_bps;
    let k = targets.len();
    let (mut rates, mut qs, mut us) = (vec![0.0; k], vec![0.0; k], vec![0.0; k]);
    for user in 0..k {
        let target = targets[user];
        let mut q = ext.q[user].min(gammas[user]).max(Q_FLOOR);
        let mut u = ext
            .u
            .as_ref()
            .map(|u| u[user])
            .unwrap_or(0.0)
            .max(dispersion(q).sqrt());
        let mut rho = ext.rho[user].min(rate.bound_slack(q, u) / target);

        let q_true = gammas[user].max(Q_FLOOR);
        let u_true = dispersion(q_true).sqrt();
        let rho_true = (rate.bound_slack(q_true, u_true) / target).min(1.0);
        if (rho_true - 1.0).abs() <= (rho - 1.0).abs() {
            q = q_true;
            u = u_true;
            rho = rho_true;
        }
        rates[user] = rho * target;
        qs[user] = q;
        us[user] = u;
    }
    Iterate {
        w,
        v,
        rates_bps: rates,
        q: qs,
        u: us,
    }
}

fn achievable(channels: &ChannelSet, it: &Iterate, rate: &RateModel) -> Vec<f64> {
    it.sinrs(channels)
        .into_iter()
        .map(|g| rate.achievable(g))
        .collect()
}

/// Alternates one beamforming step and one phase step at a time, each
/// costing `T_calc`, while the next step still fits in `T_c`.
pub fn alternate(
    channels: &ChannelSet,
    config: &SystemConfig,
    rate: &RateModel,
    start: &Iterate,
    options: &AlternateOptions,
) -> Result<AlternationTrace, ScaError> {
    start.validate(channels)?;
    let targets = &config.rate_targets_bps;
    let mut limit = budget_steps(config);
    if let Some(m) = options.max_steps {
        limit = limit.min(m);
    }
    let mut it = start.clone();
    let mut trace = AlternationTrace {
        regime: rate.regime,
        psi_initial: it.psi(targets),
        initial_rates_bps: achievable(channels, &it, rate),
        steps: Vec::new(),
        failure: None,
        final_iterate: it.clone(),
    };
    let mut kind = SubproblemKind::Beamforming;
    let mut psis = vec![trace.psi_initial];
    for z in 1..=limit {
        if options.stop == StopRule::BudgetOrConvergence
            && convergence_step(&psis) + CONVERGENCE_RUN < psis.len()
        {
            break;
        }
        let built = match kind {
            SubproblemKind::Beamforming => {
                build_beamforming_subproblem(&it, channels, config, rate)?
            }
            SubproblemKind::Phase => build_phase_subproblem(&it, channels, config, rate)?,
        };
        let sol = solve_with(&options.solver, &built.program, options.tol)?;
        let x = match (sol.status, sol.primal) {
            (SolveStatus::Optimal, Some(x)) => x,
            (status, _) => {
                trace.failure = Some(StepFailure { z, kind, status });
                break;
            }
        };
        it = settle(&it, built.extract(&x, &it), channels, config, rate);
        let psi = it.psi(targets);
        psis.push(psi);
        trace.steps.push(StepRecord {
            z,
            kind,
            psi,
            status: sol.status,
            time_s: z as f64 * config.per_subproblem_time_s,
            solve_time_s: sol.solve_time_s,
            rates_bps: achievable(channels, &it, rate),
        });
        kind = kind.other();
    }
    trace.final_iterate = it;
    Ok(trace)
}
