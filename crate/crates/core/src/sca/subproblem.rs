use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::Serialize;

use super::{
    linearize_dispersion, linearize_sinr_beamforming, linearize_sinr_phase, unit_modulus_penalty,
    Iterate, RateModel, ScaError, Q_FLOOR,
};
use crate::conic::{
    log_rate_epigraph_scaled, AffineExpr, ComplexBlock, ConicProgram, ConstraintBlock,
    ProgramBuilder,
};
use crate::model::{ChannelSet, SystemConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum SubproblemKind {
    Beamforming,
    Phase,
}

impl SubproblemKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SubproblemKind::Beamforming => "beamforming",
            SubproblemKind::Phase => "phase",
        }
    }

    pub fn other(&self) -> Self {
        match self {
            SubproblemKind::Beamforming => SubproblemKind::Phase,
            SubproblemKind::Phase => SubproblemKind::Beamforming,
        }
    }
}

/// Where each quantity lives in the program's variable vector.
#[derive(Debug, Clone, PartialEq)]
pub struct Layout {
    pub kind: SubproblemKind,
    /// `w / sqrt(power unit)` (column-major NL x K) or `v - v~`.
    pub complex: ComplexBlock,
    /// Rate as a fraction of the user's target.
    pub rho: Vec<usize>,
    /// SINR slack relative to its expansion point, `q / q~`.
    pub q: Vec<usize>,
    pub q_scale: Vec<f64>,
    pub u: Option<Vec<usize>>,
    pub gap: Vec<usize>,
    /// Users whose expansion point admits no positive SINR slack.
    pub pinned: Vec<bool>,
    pub power_unit_w: f64,
}

#[derive(Debug, Clone)]
pub struct BuiltSubproblem {
    pub program: ConicProgram,
    pub layout: Layout,
}

/// Values read back from a solved program.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Extracted {
    pub w: Option<DMatrix<Complex64>>,
    pub v: Option<DVector<Complex64>>,
    pub rho: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Option<Vec<f64>>,
}

impl BuiltSubproblem {
    pub(crate) fn extract(&self, x: &[f64], iterate: &Iterate) -> Extracted {
        let l = &self.layout;
        let z = l.complex.extract(x);
        let (w, v) = match l.kind {
            SubproblemKind::Beamforming => {
                let s = l.power_unit_w.sqrt();
                let nl = iterate.w.nrows();
                let k = iterate.w.ncols();
                (
                    Some(DMatrix::from_iterator(nl, k, z.into_iter().map(|c| c * s))),
                    None,
                )
            }
            SubproblemKind::Phase => (
                None,
                Some(DVector::from_iterator(
                    z.len(),
                    z.into_iter().zip(iterate.v.iter()).map(|(d, t)| t + d),
                )),
            ),
        };
        Extracted {
            w,
            v,
            rho: l.rho.iter().map(|&j| x[j]).collect(),
            q: l.q
                .iter()
                .zip(&l.q_scale)
                .map(|(&j, s)| (x[j] * s).max(0.0))
                .collect(),
            u: l.u.as_ref().map(|u| u.iter().map(|&j| x[j]).collect()),
        }
    }
}

struct RateVars {
    rho: Vec<usize>,
    q: Vec<usize>,
    q_scale: Vec<f64>,
    u: Option<Vec<usize>>,
    gap: Vec<usize>,
}

/// Rate epigraphs, dispersion tangents and `|rho - 1|` epigraphs shared by
/// both subproblems.
fn add_rate_part(
    b: &mut ProgramBuilder,
    iterate: &Iterate,
    q_scale: Vec<f64>,
    targets_bps: &[f64],
    rate: &RateModel,
) -> Result<RateVars, ScaError> {
    let k = targets_bps.len();
    let rho = b.add_vars("rho", k);
    let q = b.add_vars("q", k);
    let gap = b.add_vars("gap", k);
    let u = rate.uses_dispersion().then(|| b.add_vars("u", k));
    for user in 0..k {
        b.set_bounds(q[user], 0.0, f64::INFINITY);
        let scaled_bw = rate.bandwidth_hz / targets_bps[user];
        let u_index = u.as_ref().map(|u| u[user]);
        log_rate_epigraph_scaled(
            b,
            q[user],
            q_scale[user],
            rho[user],
            u_index,
            scaled_bw,
            rate.penalty,
        );
        if let Some(ui) = u_index {
            b.set_bounds(ui, 0.0, f64::INFINITY);
            let tangent = linearize_dispersion(iterate.q[user].max(Q_FLOOR))?;
            b.push(tangent.block(q[user], q_scale[user], ui), "dispersion");
        }
        b.push(
            ConstraintBlock::Inequality(vec![
                AffineExpr::var(rho[user]) - AffineExpr::var(gap[user]) + (-1.0),
                AffineExpr::constant(1.0) - AffineExpr::var(rho[user]) - AffineExpr::var(gap[user]),
            ]),
            "gap",
        );
        b.add_objective_term(gap[user], 1.0);
    }
    Ok(RateVars {
        rho,
        q,
        q_scale,
        u,
        gap,
    })
}

/// SINR cuts are expanded at the true SINR of the current point (floored).
/// Any carried slack `q <= SINR` then stays feasible.
fn expansion_sinrs(iterate: &Iterate, channels: &ChannelSet) -> Vec<f64> {
    iterate
        .sinrs(channels)
        .into_iter()
        .map(|g| g.max(Q_FLOOR))
        .collect()
}

fn power_unit(config: &SystemConfig) -> (f64, f64) {
    if config.max_tx_power_w > 0.0 {
        (config.max_tx_power_w, 1.0)
    } else {
        (1.0, 0.0)
    }
}

/// Beamforming step with the phases fixed at `v~`: minimise the adaptation
/// gap subject to per-AP power cones, rate epigraphs, tangent SINR cuts and
/// (FBL only) dispersion tangents.
pub fn build_beamforming_subproblem(
    iterate: &Iterate,
    channels: &ChannelSet,
    config: &SystemConfig,
    rate: &RateModel,
) -> Result<BuiltSubproblem, ScaError> {
    iterate.validate(channels)?;
    let (nl, k, l) = (
        channels.total_antennas(),
        channels.n_users(),
        channels.antennas_per_ap(),
    );
    let (unit, budget) = power_unit(config);
    let mut b = ProgramBuilder::new();
    let w = b.add_complex("w", nl * k);
    let cut_points = expansion_sinrs(iterate, channels);
    let vars = add_rate_part(
        &mut b,
        iterate,
        cut_points.clone(),
        &config.rate_targets_bps,
        rate,
    )?;

    for n in 0..channels.n_aps() {
        let mut tail = Vec::with_capacity(2 * l * k);
        for user in 0..k {
            for a in 0..l {
                let idx = user * nl + n * l + a;
                tail.push(AffineExpr::var(w.re(idx)));
                tail.push(AffineExpr::var(w.im(idx)));
            }
        }
        b.push(
            ConstraintBlock::SecondOrderCone {
                head: AffineExpr::constant(budget),
                tail,
            },
            format!("power[{n}]"),
        );
    }

    let mut pinned = vec![false; k];
    for user in 0..k {
        let cut =
            linearize_sinr_beamforming(&iterate.w, &iterate.v, cut_points[user], channels, user);
        if cut.tangent_feasible() {
            b.push(
                cut.block(w, vars.q[user], unit.sqrt()),
                format!("sinr[{user}]"),
            );
        } else {
            pinned[user] = true;
            b.set_bounds(vars.q[user], 0.0, 0.0);
        }
    }

    Ok(BuiltSubproblem {
        program: b.build()?,
        layout: Layout {
            kind: SubproblemKind::Beamforming,
            complex: w,
            rho: vars.rho,
            q: vars.q,
            q_scale: vars.q_scale,
            u: vars.u,
            gap: vars.gap,
            pinned,
            power_unit_w: unit,
        },
    })
}

/// Phase step with the beamformers fixed: minimise `Psi - Phi` over the
/// displacement `delta = v - v~`, with disks `|v_m| <= 1`, tangent SINR
/// cuts, rate epigraphs and dispersion tangents.
///
/// The constant part of `Phi` is left out of the program objective so the
/// objective stays on the scale of `Psi`.
pub fn build_phase_subproblem(
    iterate: &Iterate,
    channels: &ChannelSet,
    config: &SystemConfig,
    rate: &RateModel,
) -> Result<BuiltSubproblem, ScaError> {
    iterate.validate(channels)?;
    let (m, k) = (channels.n_elements(), channels.n_users());
    let mut b = ProgramBuilder::new();
    let delta = b.add_complex("delta", m);
    let cut_points = expansion_sinrs(iterate, channels);
    let vars = add_rate_part(
        &mut b,
        iterate,
        cut_points.clone(),
        &config.rate_targets_bps,
        rate,
    )?;

    let penalty = unit_modulus_penalty(&iterate.v, config.penalty_weight);
    for (i, (cr, ci)) in penalty.coefficients().into_iter().enumerate() {
        b.add_objective_term(delta.re(i), -cr);
        b.add_objective_term(delta.im(i), -ci);
        let t = iterate.v[i];
        b.push(
            ConstraintBlock::SecondOrderCone {
                head: AffineExpr::constant(1.0),
                tail: vec![
                    AffineExpr::var(delta.re(i)) + t.re,
                    AffineExpr::var(delta.im(i)) + t.im,
                ],
            },
            format!("disk[{i}]"),
        );
    }

    let mut pinned = vec![false; k];
    for user in 0..k {
        let cut = linearize_sinr_phase(&iterate.w, &iterate.v, cut_points[user], channels, user);
        if cut.tangent_feasible() {
            b.push(cut.block(delta, vars.q[user]), format!("sinr[{user}]"));
        } else {
            pinned[user] = true;
            b.set_bounds(vars.q[user], 0.0, 0.0);
        }
    }

    Ok(BuiltSubproblem {
        program: b.build()?,
        layout: Layout {
            kind: SubproblemKind::Phase,
            complex: delta,
            rho: vars.rho,
            q: vars.q,
            q_scale: vars.q_scale,
            u: vars.u,
            gap: vars.gap,
            pinned,
            power_unit_w: power_unit(config).0,
        },
    })
}

impl BuiltSubproblem {
    /// Lifts `iterate` into the program's variable space (the point every SCA
    /// step must keep feasible).
    pub fn tangent_point(&self, iterate: &Iterate, targets_bps: &[f64]) -> Vec<f64> {
        let p = &self.program;
        let l = &self.layout;
        let mut x = vec![0.0; p.num_vars()];
        match l.kind {
            SubproblemKind::Beamforming => {
                let s = 1.0 / l.power_unit_w.sqrt();
                let vals: Vec<Complex64> = iterate.w.iter().map(|z| z * s).collect();
                p.variables()
                    .lift("w", &vals, &mut x)
                    .expect("layout matches");
            }
            SubproblemKind::Phase => {}
        }
        for user in 0..targets_bps.len() {
            let q = if l.pinned[user] {
                0.0
            } else {
                iterate.q[user] / l.q_scale[user]
            };
            let rho = iterate.rates_bps[user] / targets_bps[user];
            x[l.rho[user]] = rho;
            x[l.q[user]] = q;
            x[l.gap[user]] = (rho - 1.0).abs();
            if let Some(u) = &l.u {
                x[u[user]] = iterate.u[user];
            }
        }
        // t = ln(1 + q) for every exponential block, in user order
        let mut user = 0;
        for block in p.constraints() {
            if let ConstraintBlock::ExponentialCone([t, _, _]) = block {
                let j = t.terms[0].0;
                x[j] = (x[l.q[user]] * l.q_scale[user]).ln_1p();
                user += 1;
            }
        }
        x
    }
}
