//! Convexified beamforming and phase subproblems around an iterate, and the
//! alternating loop that runs them one step at a time within the coherence
//! budget.
//!
//! Internally, channels are rescaled so the noise power is one and the
//! per-AP budget is one, and rates are expressed as fractions of each
//! user's target.

mod alternate;
mod linearize;
mod subproblem;

pub use alternate::{
    alternate, convergence_step, AlternateOptions, AlternationTrace, StepFailure, StepRecord,
    StopRule, CONVERGENCE_RUN, CONVERGENCE_THRESHOLD,
};
pub use linearize::{
    linearize_dispersion, linearize_sinr_beamforming, linearize_sinr_phase, project_unit_modulus,
    unit_modulus_penalty, BeamformingCut, DispersionTangent, PhaseCut, PhasePenalty,
};
pub use subproblem::{
    build_beamforming_subproblem, build_phase_subproblem, BuiltSubproblem, Layout, SubproblemKind,
};

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::Rng;
use serde::Serialize;

use crate::conic::ConicError;
use crate::fbl::{self, FblError, FblParams};
use crate::model::{effective_channel, sinr_all, ChannelSet, ModelError, Regime, SystemConfig};

/// Smallest SINR used as an expansion point.
pub const Q_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScaError {
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Fbl(#[from] FblError),
    #[error("invalid iterate: {0}")]
    InvalidIterate(String),
}

/// Rate bound `B * (log2(1 + q) - penalty * sqrt(V(q)))` of one regime.
///
/// The IBL regime is the same bound with a zero penalty.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct RateModel {
    pub regime: Regime,
    pub bandwidth_hz: f64,
    pub penalty: f64,
}

impl RateModel {
    pub fn ibl(bandwidth_hz: f64) -> Self {
        Self {
            regime: Regime::Ibl,
            bandwidth_hz,
            penalty: 0.0,
        }
    }

    pub fn fbl(params: &FblParams) -> Self {
        Self {
            regime: Regime::Fbl,
            bandwidth_hz: params.bandwidth_hz,
            penalty: params.penalty(),
        }
    }

    pub fn for_regime(regime: Regime, config: &SystemConfig) -> Self {
        match regime {
            Regime::Ibl => Self::ibl(config.bandwidth_hz),
            Regime::Fbl => Self::fbl(&config.fbl_params()),
        }
    }

    pub fn uses_dispersion(&self) -> bool {
        self.penalty != 0.0
    }

    /// Unclamped bound at SINR `gamma`.
    pub fn bound(&self, gamma: f64) -> f64 {
        fbl::rate_bound(gamma, self.bandwidth_hz, self.penalty)
    }

    /// Bound with the dispersion root replaced by `u`.
    pub fn bound_slack(&self, q: f64, u: f64) -> f64 {
        let log = q.max(0.0).ln_1p() * std::f64::consts::LOG2_E;
        if self.uses_dispersion() {
            self.bandwidth_hz * (log - self.penalty * u)
        } else {
            self.bandwidth_hz * log
        }
    }

    pub fn achievable(&self, gamma: f64) -> f64 {
        self.bound(gamma).max(0.0)
    }
}

/// Expansion point of the subproblems: beamformers, phases and the slack
/// triple (rates, SINR slacks, dispersion slacks).
#[derive(Debug, Clone, PartialEq)]
pub struct Iterate {
    /// NL x K, physical units.
    pub w: DMatrix<Complex64>,
    pub v: DVector<Complex64>,
    pub rates_bps: Vec<f64>,
    pub q: Vec<f64>,
    pub u: Vec<f64>,
}

impl Iterate {
    /// Slack triple consistent with the true SINRs of `(w, v)`.
    pub fn from_beamformers(
        channels: &ChannelSet,
        w: DMatrix<Complex64>,
        v: DVector<Complex64>,
        targets_bps: &[f64],
        rate: &RateModel,
    ) -> Self {
        let gammas = sinr_all(channels, &w, &v);
        let q: Vec<f64> = gammas.iter().map(|g| g.max(Q_FLOOR)).collect();
        let u: Vec<f64> = q.iter().map(|&q| fbl::dispersion(q).sqrt()).collect();
        let rates_bps = q
            .iter()
            .zip(&u)
            .zip(targets_bps)
            .map(|((&q, &u), &target)| target.min(rate.bound_slack(q, u)))
            .collect();
        Self {
            w,
            v,
            rates_bps,
            q,
            u,
        }
    }

    pub fn n_users(&self) -> usize {
        self.w.ncols()
    }

    /// Adaptation gap of the slack rates.
    pub fn psi(&self, targets_bps: &[f64]) -> f64 {
        self.rates_bps
            .iter()
            .zip(targets_bps)
            .map(|(r, t)| (r / t - 1.0).abs())
            .sum()
    }

    pub fn sinrs(&self, channels: &ChannelSet) -> Vec<f64> {
        sinr_all(channels, &self.w, &self.v)
    }

    pub fn validate(&self, channels: &ChannelSet) -> Result<(), ScaError> {
        let k = channels.n_users();
        if self.w.nrows() != channels.total_antennas() || self.w.ncols() != k {
            return Err(ScaError::InvalidIterate(format!(
                "beamformers are {}x{}, expected {}x{k}",
                self.w.nrows(),
                self.w.ncols(),
                channels.total_antennas()
            )));
        }
        if self.v.len() != channels.n_elements() {
            return Err(ScaError::InvalidIterate("phase vector length".into()));
        }
        if self.rates_bps.len() != k || self.q.len() != k || self.u.len() != k {
            return Err(ScaError::InvalidIterate(
                "slack vectors must have one entry per user".into(),
            ));
        }
        if self.q.iter().any(|&q| !(q > 0.0)) {
            return Err(ScaError::InvalidIterate(
                "SINR slacks must be positive".into(),
            ));
        }
        if self.u.iter().any(|&u| !(u >= 0.0)) {
            return Err(ScaError::InvalidIterate(
                "dispersion slacks must be nonnegative".into(),
            ));
        }
        Ok(())
    }
}

/// Per-AP matched filters on the effective channels with the budget split
/// evenly across users, random unit-modulus phases, and slacks at the true
/// SINRs (floored).
pub fn initialize_iterate<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &SystemConfig,
    rate: &RateModel,
    rng: &mut R,
) -> Iterate {
    let m = channels.n_elements();
    let v = DVector::from_fn(m, |_, _| {
        Complex64::from_polar(1.0, rng.gen_range(0.0..std::f64::consts::TAU))
    });
    let w = matched_filter(channels, &v, config.max_tx_power_w);
    Iterate::from_beamformers(channels, w, v, &config.rate_targets_bps, rate)
}

/// Per-AP matched filters with per-AP power `max_power_w` split evenly.
pub fn matched_filter(
    channels: &ChannelSet,
    v: &DVector<Complex64>,
    max_power_w: f64,
) -> DMatrix<Complex64> {
    let (n_aps, l, k) = (
        channels.n_aps(),
        channels.antennas_per_ap(),
        channels.n_users(),
    );
    let amp = (max_power_w / k as f64).sqrt();
    let mut w = DMatrix::zeros(n_aps * l, k);
    for user in 0..k {
        let heff = effective_channel(channels, v, user);
        for n in 0..n_aps {
            let block = heff.rows(n * l, l);
            let norm = block.norm();
            for a in 0..l {
                w[(n * l + a, user)] = if norm > 0.0 {
                    block[a] * (amp / norm)
                } else {
                    Complex64::new(amp / (l as f64).sqrt(), 0.0)
                };
            }
        }
    }
    w
}
