use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use super::{ScaError, Q_FLOOR};
use crate::conic::{AffineExpr, ComplexBlock, ConstraintBlock};
use crate::fbl::dispersion;
use crate::model::{effective_channel, ChannelSet};

/// Affine over-estimator of `sqrt(V(q))`, tangent at `at`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionTangent {
    pub at: f64,
    pub value: f64,
    pub slope: f64,
}

impl DispersionTangent {
    pub fn eval(&self, q: f64) -> f64 {
        self.value + self.slope * (q - self.at)
    }

    /// `slope * q - u + (value - slope * at) <= 0`, with the variable at
    /// `q_index` holding `q / q_scale`.
    pub fn block(&self, q_index: usize, q_scale: f64, u_index: usize) -> ConstraintBlock {
        ConstraintBlock::Inequality(vec![
            AffineExpr::term(q_index, self.slope * q_scale) - AffineExpr::var(u_index)
                + (self.value - self.slope * self.at),
        ])
    }
}

pub fn linearize_dispersion(q_tilde: f64) -> Result<DispersionTangent, ScaError> {
    if !(q_tilde > 0.0 && q_tilde.is_finite()) {
        return Err(ScaError::InvalidIterate(format!(
            "dispersion tangent needs a positive point, got {q_tilde}"
        )));
    }
    let v = dispersion(q_tilde);
    let root = v.sqrt();
    Ok(DispersionTangent {
        at: q_tilde,
        value: root,
        slope: (1.0 + q_tilde).powi(-3) / root,
    })
}

/// Rotated-cone form of `sum_i |x_i|^2 + 1 <= lin`, i.e.
/// `|| (2 x, 2, lin - 1) || <= lin + 1`, after dividing through by `scale`
/// (the interference-plus-noise level at the expansion point) so the cone
/// entries are of order one there.
fn interference_cone(
    parts: Vec<(AffineExpr, AffineExpr)>,
    lin: AffineExpr,
    scale: f64,
) -> ConstraintBlock {
    let root = scale.sqrt();
    let lin = lin * (1.0 / scale);
    let mut tail = Vec::with_capacity(2 * parts.len() + 2);
    for (re, im) in parts {
        tail.push(re * (2.0 / root));
        tail.push(im * (2.0 / root));
    }
    tail.push(AffineExpr::constant(2.0 / root));
    tail.push(lin.clone() + (-1.0));
    ConstraintBlock::SecondOrderCone {
        head: lin + 1.0,
        tail,
    }
}

/// Tangent inner approximation of `q_k <= SINR_k(w)` around `(w~, q~)`:
///
/// `sum_{i != k} |a^H w_i|^2 + 1 + |c|^2 / q~^2 q - 2 / q~ Re{c^* a^H w_k} <= 0`
///
/// with `a` the noise-normalised effective channel of user `k` and
/// `c = a^H w~_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BeamformingCut {
    pub user: usize,
    pub q_tilde: f64,
    heff: DVector<Complex64>,
    signal: Complex64,
    interference: f64,
}

impl BeamformingCut {
    /// Residual in noise units; nonpositive iff the block holds.
    pub fn residual(&self, w: &DMatrix<Complex64>, q: f64) -> f64 {
        let mut interference = 0.0;
        let mut own = Complex64::new(0.0, 0.0);
        for (i, col) in w.column_iter().enumerate() {
            let z = self.heff.dotc(&col);
            if i == self.user {
                own = z;
            } else {
                interference += z.norm_sqr();
            }
        }
        let s = self.signal.norm_sqr();
        interference + 1.0 + s / (self.q_tilde * self.q_tilde) * q
            - 2.0 / self.q_tilde * (self.signal.conj() * own).re
    }

    /// True when some `q >= 0` satisfies the block at `w~`.
    pub fn tangent_feasible(&self) -> bool {
        self.interference + 1.0 <= 2.0 * self.signal.norm_sqr() / self.q_tilde
    }

    /// Emits the block over lifted `w' = w / scale` (column-major, NL x K)
    /// and `q / q~` at `q_index`.
    pub fn block(&self, w: ComplexBlock, q_index: usize, scale: f64) -> ConstraintBlock {
        let nl = self.heff.len();
        let k = w.len / nl;
        let column = |i: usize| ComplexBlock {
            start: w.start + 2 * nl * i,
            len: nl,
        };
        let a_conj: Vec<Complex64> = self.heff.iter().map(|a| a.conj() * scale).collect();
        let parts = (0..k)
            .filter(|&i| i != self.user)
            .map(|i| column(i).linear_form(&a_conj))
            .collect();
        let own_coeffs: Vec<Complex64> = a_conj.iter().map(|a| self.signal.conj() * a).collect();
        let (own_re, _) = column(self.user).linear_form(&own_coeffs);
        let s = self.signal.norm_sqr();
        let lin = own_re * (2.0 / self.q_tilde) - AffineExpr::term(q_index, s / self.q_tilde);
        interference_cone(parts, lin, self.interference + 1.0)
    }
}

pub fn linearize_sinr_beamforming(
    w_tilde: &DMatrix<Complex64>,
    v: &DVector<Complex64>,
    q_tilde: f64,
    channels: &ChannelSet,
    k: usize,
) -> BeamformingCut {
    let scale = 1.0 / channels.noise_power_w().sqrt();
    let heff = effective_channel(channels, v, k) * Complex64::new(scale, 0.0);
    let mut signal = Complex64::new(0.0, 0.0);
    let mut interference = 0.0;
    for (i, col) in w_tilde.column_iter().enumerate() {
        let z = heff.dotc(&col);
        if i == k {
            signal = z;
        } else {
            interference += z.norm_sqr();
        }
    }
    BeamformingCut {
        user: k,
        q_tilde: q_tilde.max(Q_FLOOR),
        heff,
        signal,
        interference,
    }
}

/// Tangent inner approximation of `q_k <= SINR_k(v)` with the beamformers
/// fixed. `b_i(v) = w_i^H (h_k + G_k v)` is affine in `v`:
///
/// `sum_{i != k} |b_i(v)|^2 + 1 - |b~|^2 / q~ - 2 / q~ Re{b~^* d (v - v~)}
///   + |b~|^2 / q~^2 (q - q~) <= 0`
///
/// with `b~ = b_k(v~)` and `d = w_k^H G_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseCut {
    pub user: usize,
    pub q_tilde: f64,
    v_tilde: DVector<Complex64>,
    /// `w_i^H h_k` per user `i` (noise units).
    base: Vec<Complex64>,
    /// `w_i^H G_k` per user `i`.
    grads: Vec<DVector<Complex64>>,
}

impl PhaseCut {
    pub fn term(&self, i: usize, v: &DVector<Complex64>) -> Complex64 {
        self.base[i]
            + self.grads[i]
                .iter()
                .zip(v.iter())
                .map(|(d, x)| d * x)
                .sum::<Complex64>()
    }

    /// Gradient row `w_k^H G_k`.
    pub fn gradient(&self) -> &DVector<Complex64> {
        &self.grads[self.user]
    }

    pub fn signal_at_tangent(&self) -> Complex64 {
        self.term(self.user, &self.v_tilde)
    }

    pub fn residual(&self, v: &DVector<Complex64>, q: f64) -> f64 {
        let interference: f64 = (0..self.base.len())
            .filter(|&i| i != self.user)
            .map(|i| self.term(i, v).norm_sqr())
            .sum();
        let b = self.signal_at_tangent();
        let s = b.norm_sqr();
        let qt = self.q_tilde;
        let step: Complex64 = self
            .gradient()
            .iter()
            .zip(v.iter().zip(self.v_tilde.iter()))
            .map(|(d, (x, x0))| d * (x - x0))
            .sum();
        interference + 1.0 - s / qt - 2.0 / qt * (b.conj() * step).re + s / (qt * qt) * (q - qt)
    }

    pub fn tangent_feasible(&self) -> bool {
        let interference: f64 = (0..self.base.len())
            .filter(|&i| i != self.user)
            .map(|i| self.term(i, &self.v_tilde).norm_sqr())
            .sum();
        interference + 1.0 <= 2.0 * self.signal_at_tangent().norm_sqr() / self.q_tilde
    }

    /// Emits the block over the lifted displacement `delta = v - v~` and
    /// `q / q~` at `q_index`.
    pub fn block(&self, delta: ComplexBlock, q_index: usize) -> ConstraintBlock {
        let parts = (0..self.base.len())
            .filter(|&i| i != self.user)
            .map(|i| {
                let b0 = self.term(i, &self.v_tilde);
                let (re, im) = delta.linear_form(self.grads[i].as_slice());
                (re + b0.re, im + b0.im)
            })
            .collect();
        let b = self.signal_at_tangent();
        let s = b.norm_sqr();
        let qt = self.q_tilde;
        let coeffs: Vec<Complex64> = self.gradient().iter().map(|d| b.conj() * d).collect();
        let (step_re, _) = delta.linear_form(&coeffs);
        let lin = step_re * (2.0 / qt) + 2.0 * s / qt - AffineExpr::term(q_index, s / qt);
        let level: f64 = (0..self.base.len())
            .filter(|&i| i != self.user)
            .map(|i| self.term(i, &self.v_tilde).norm_sqr())
            .sum();
        interference_cone(parts, lin, level + 1.0)
    }
}

pub fn linearize_sinr_phase(
    w: &DMatrix<Complex64>,
    v_tilde: &DVector<Complex64>,
    q_tilde: f64,
    channels: &ChannelSet,
    k: usize,
) -> PhaseCut {
    let scale = Complex64::new(1.0 / channels.noise_power_w().sqrt(), 0.0);
    let h = channels.direct(k).into_owned() * scale;
    let g = channels.reflect_matrix(k) * scale;
    let base = w.column_iter().map(|col| col.dotc(&h)).collect();
    let grads = w
        .column_iter()
        .map(|col| g.tr_mul(&col.map(|z| z.conj())))
        .collect();
    PhaseCut {
        user: k,
        q_tilde: q_tilde.max(Q_FLOOR),
        v_tilde: v_tilde.clone(),
        base,
        grads,
    }
}

/// Linear penalty `alpha * sum_m Re{2 v~_m^* v_m - |v~_m|^2}`, the tangent
/// of `alpha * sum_m |v_m|^2` at `v~`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhasePenalty {
    pub alpha: f64,
    pub v_tilde: DVector<Complex64>,
}

impl PhasePenalty {
    pub fn eval(&self, v: &DVector<Complex64>) -> f64 {
        self.alpha
            * self
                .v_tilde
                .iter()
                .zip(v.iter())
                .map(|(t, x)| 2.0 * (t.conj() * x).re - t.norm_sqr())
                .sum::<f64>()
    }

    /// Coefficients of `Re` and `Im` of each `v_m` in the penalty.
    pub fn coefficients(&self) -> Vec<(f64, f64)> {
        self.v_tilde
            .iter()
            .map(|t| (2.0 * self.alpha * t.re, 2.0 * self.alpha * t.im))
            .collect()
    }
}

pub fn unit_modulus_penalty(v_tilde: &DVector<Complex64>, alpha_v: f64) -> PhasePenalty {
    PhasePenalty {
        alpha: alpha_v,
        v_tilde: v_tilde.clone(),
    }
}

/// `v_m / |v_m|`, with zero entries mapped to one.
pub fn project_unit_modulus(v: &DVector<Complex64>) -> DVector<Complex64> {
    v.map(|z| {
        let r = z.norm();
        if r > 0.0 {
            z / r
        } else {
            Complex64::new(1.0, 0.0)
        }
    })
}
