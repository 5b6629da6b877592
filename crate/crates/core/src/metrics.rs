//! Resilience sub-metrics, the combined score and the adaptation gap.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("resilience_weights must be nonnegative and sum to 1 (got {0:?})")]
    Weights([f64; 3]),
    #[error("rate snapshot: {0}")]
    Snapshot(String),
    #[error("timeline: {0}")]
    Timeline(String),
}

/// How per-user rate ratios enter absorption / adaptation.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RatioMode {
    /// `min(1, achieved / desired)`
    #[default]
    Capped,
    /// `achieved / desired` as written, may exceed one.
    Uncapped,
}

impl RatioMode {
    fn apply(self, ratio: f64) -> f64 {
        match self {
            RatioMode::Capped => ratio.min(1.0),
            RatioMode::Uncapped => ratio,
        }
    }
}

/// Weights `(l1, l2, l3)` for absorption, adaptation and time-to-recovery.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResilienceWeights([f64; 3]);

impl ResilienceWeights {
    pub fn new(weights: [f64; 3]) -> Result<Self, MetricsError> {
        let sum: f64 = weights.iter().sum();
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || (sum - 1.0).abs() > 1e-9 {
            return Err(MetricsError::Weights(weights));
        }
        Ok(Self(weights))
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timeline {
    pub t0_s: f64,
    pub tq_s: f64,
    pub t0_max_s: f64,
}

impl Timeline {
    pub fn new(t0_s: f64, tq_s: f64, t0_max_s: f64) -> Result<Self, MetricsError> {
        if !(tq_s >= t0_s) {
            return Err(MetricsError::Timeline(format!(
                "t_q = {tq_s} precedes t_0 = {t0_s}"
            )));
        }
        if !(t0_max_s > 0.0) {
            return Err(MetricsError::Timeline(format!(
                "T_0 = {t0_max_s} must be positive"
            )));
        }
        Ok(Self {
            t0_s,
            tq_s,
            t0_max_s,
        })
    }
}

/// Per-user achieved rates alongside their targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSnapshot {
    achieved_bps: Vec<f64>,
    desired_bps: Vec<f64>,
}

impl RateSnapshot {
    pub fn new(achieved_bps: Vec<f64>, desired_bps: Vec<f64>) -> Result<Self, MetricsError> {
        if achieved_bps.len() != desired_bps.len() || achieved_bps.is_empty() {
            return Err(MetricsError::Snapshot(format!(
                "{} achieved vs {} desired entries",
                achieved_bps.len(),
                desired_bps.len()
            )));
        }
        if desired_bps.iter().any(|d| !(*d > 0.0 && d.is_finite())) {
            return Err(MetricsError::Snapshot(
                "desired rates must be positive".into(),
            ));
        }
        if achieved_bps.iter().any(|a| !(*a >= 0.0 && a.is_finite())) {
            return Err(MetricsError::Snapshot(
                "achieved rates must be nonnegative".into(),
            ));
        }
        Ok(Self {
            achieved_bps,
            desired_bps,
        })
    }

    pub fn achieved(&self) -> &[f64] {
        &self.achieved_bps
    }

    pub fn desired(&self) -> &[f64] {
        &self.desired_bps
    }

    fn ratios(&self) -> impl Iterator<Item = f64> + '_ {
        self.achieved_bps
            .iter()
            .zip(&self.desired_bps)
            .map(|(a, d)| a / d)
    }

    fn mean_ratio(&self, mode: RatioMode) -> f64 {
        self.ratios().map(|r| mode.apply(r)).sum::<f64>() / self.achieved_bps.len() as f64
    }
}

/// Fraction of service retained right after the disruption (IBL rates at `t_0`).
pub fn absorption(snapshot_at_t0: &RateSnapshot, mode: RatioMode) -> f64 {
    snapshot_at_t0.mean_ratio(mode)
}

/// Fraction of service restored at the recovery instant (FBL rates at `t_q`).
pub fn adaptation(snapshot_at_tq: &RateSnapshot, mode: RatioMode) -> f64 {
    snapshot_at_tq.mean_ratio(mode)
}

/// 1 within the allowed recovery time, `T_0 / (t_q - t_0)` beyond it.
pub fn time_to_recovery(timeline: &Timeline) -> f64 {
    let elapsed = timeline.tq_s - timeline.t0_s;
    if elapsed <= timeline.t0_max_s {
        1.0
    } else {
        timeline.t0_max_s / elapsed
    }
}

pub fn resilience(r_abs: f64, r_ada: f64, r_rec: f64, weights: &ResilienceWeights) -> f64 {
    let [l1, l2, l3] = weights.0;
    l1 * r_abs + l2 * r_ada + l3 * r_rec
}

/// Network-wide adaptation gap `sum_k |r_k / r_k^des - 1|` (never capped).
pub fn adaptation_gap(snapshot: &RateSnapshot) -> f64 {
    snapshot.ratios().map(|r| (r - 1.0).abs()).sum()
}
