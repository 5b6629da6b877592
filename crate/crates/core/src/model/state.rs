use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::{effective_channel, ChannelSet};

/// Coding regime the rates are evaluated in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regime {
    Ibl,
    Fbl,
}

/// Beamformers (NL x K, column `k` is `w_k`), RIS phase vector and the
/// rates allocated to each user.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkState {
    pub beamformers: DMatrix<Complex64>,
    pub phase_vector: DVector<Complex64>,
    pub rates_bps: Vec<f64>,
    pub regime: Regime,
}

/// `sum_k |w_{n,k}|^2` for every AP `n`.
pub fn per_ap_power(beamformers: &DMatrix<Complex64>, antennas_per_ap: usize) -> Vec<f64> {
    let n_aps = beamformers.nrows() / antennas_per_ap;
    (0..n_aps)
        .map(|n| {
            beamformers
                .rows(n * antennas_per_ap, antennas_per_ap)
                .iter()
                .map(|z| z.norm_sqr())
                .sum()
        })
        .collect()
}

fn sinr_with(heff: &DVector<Complex64>, w: &DMatrix<Complex64>, k: usize, noise: f64) -> f64 {
    let mut signal = 0.0;
    let mut interference = 0.0;
    for (i, col) in w.column_iter().enumerate() {
        let p = heff.dotc(&col).norm_sqr();
        if i == k {
            signal = p;
        } else {
            interference += p;
        }
    }
    signal / (interference + noise)
}

/// SINR of user `k` under beamformers `w` and phases `v`.
pub fn sinr(channels: &ChannelSet, state: &NetworkState, k: usize) -> f64 {
    let heff = effective_channel(channels, &state.phase_vector, k);
    sinr_with(&heff, &state.beamformers, k, channels.noise_power_w())
}

/// SINRs of all users for explicit `(w, v)`.
pub fn sinr_all(channels: &ChannelSet, w: &DMatrix<Complex64>, v: &DVector<Complex64>) -> Vec<f64> {
    (0..channels.n_users())
        .map(|k| {
            sinr_with(
                &effective_channel(channels, v, k),
                w,
                k,
                channels.noise_power_w(),
            )
        })
        .collect()
}
