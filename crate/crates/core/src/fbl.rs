//! Infinite- and finite-blocklength rate mathematics.
//!
//! The FBL rate uses the normal approximation
//! `B * (log2(1 + g) - Omega * sqrt(V(g) / eta))` with
//! `Omega = Q^{-1}(eps) * log2(e)` and dispersion `V(g) = 1 - (1 + g)^-2`.

use libm::erfc;
use serde::{Deserialize, Serialize};
use std::f64::consts::{LOG2_E, SQRT_2};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FblError {
    #[error("probability {0} outside the open interval (0, 1)")]
    Domain(f64),
    #[error("block error rate {0} must lie in (0, 0.5)")]
    Bler(f64),
    #[error("blocklength must be at least 1")]
    Blocklength,
    #[error("bandwidth {0} must be positive")]
    Bandwidth(f64),
}

/// Gaussian tail probability `Q(x) = P[N(0,1) > x]`.
pub fn q_function(x: f64) -> f64 {
    0.5 * erfc(x / SQRT_2)
}

/// Inverse of [`q_function`] by bisection on a bracket.
///
/// Bisection runs until the bracket cannot shrink further in `f64`, so the
/// result is as accurate as `Q` itself.
pub fn q_inv(p: f64) -> Result<f64, FblError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(FblError::Domain(p));
    }
    // Q(-40) == 1 and Q(40) == 0 in f64, so the root is always inside.
    let (mut lo, mut hi) = (-40.0_f64, 40.0_f64);
    loop {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if q_function(mid) > p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // pick the endpoint with the smaller residual
    let (rl, rh) = ((q_function(lo) - p).abs(), (q_function(hi) - p).abs());
    Ok(if rl <= rh { lo } else { hi })
}

/// Channel dispersion `1 - (1 + gamma)^-2`.
pub fn dispersion(gamma: f64) -> f64 {
    let g = gamma.max(0.0);
    let inv = 1.0 / (1.0 + g);
    1.0 - inv * inv
}

/// Shannon rate `B * log2(1 + gamma)` in bits/s.
pub fn ibl_rate(gamma: f64, bandwidth_hz: f64) -> f64 {
    bandwidth_hz * gamma.max(0.0).ln_1p() * LOG2_E
}

/// Rate bound with an explicit dispersion penalty coefficient
/// (`penalty = Omega / sqrt(eta)`), without clamping at zero.
pub fn rate_bound(gamma: f64, bandwidth_hz: f64, penalty: f64) -> f64 {
    let g = gamma.max(0.0);
    bandwidth_hz * (g.ln_1p() * LOG2_E - penalty * dispersion(g).sqrt())
}

/// Finite-blocklength parameters with the derived `Omega`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FblParams {
    pub blocklength: u64,
    pub bler: f64,
    pub omega: f64,
    pub bandwidth_hz: f64,
}

impl FblParams {
    pub fn new(blocklength: u64, bler: f64, bandwidth_hz: f64) -> Result<Self, FblError> {
        if blocklength == 0 {
            return Err(FblError::Blocklength);
        }
        if !(bler > 0.0 && bler < 0.5) {
            return Err(FblError::Bler(bler));
        }
        if !(bandwidth_hz > 0.0 && bandwidth_hz.is_finite()) {
            return Err(FblError::Bandwidth(bandwidth_hz));
        }
        let omega = q_inv(bler)? * LOG2_E;
        Ok(Self {
            blocklength,
            bler,
            omega,
            bandwidth_hz,
        })
    }

    /// Copy with `omega` overridden, detaching it from `bler`.
    ///
    /// Only meant for sensitivity runs (e.g. `omega = 0` must reproduce the
    /// IBL pipeline exactly).
    pub fn with_forced_omega(mut self, omega: f64) -> Self {
        self.omega = omega;
        self
    }

    /// Dispersion penalty coefficient `Omega / sqrt(eta)`.
    pub fn penalty(&self) -> f64 {
        self.omega / (self.blocklength as f64).sqrt()
    }
}

/// FBL achievable rate, clamped at zero.
pub fn fbl_rate(gamma: f64, params: &FblParams) -> f64 {
    rate_bound(gamma, params.bandwidth_hz, params.penalty()).max(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    #[test]
    fn q_inv_examples() {
        assert_abs_diff_eq!(q_inv(0.5).unwrap(), 0.0, epsilon = 1e-15);
        assert_abs_diff_eq!(q_inv(q_function(1.0)).unwrap(), 1.0, epsilon = 1e-12);
        // 50-digit bisection on mpmath.erfc
        assert_abs_diff_eq!(q_inv(1e-5).unwrap(), 4.264_890_793_922_825, epsilon = 1e-12);
        assert_abs_diff_eq!(q_inv(1e-9).unwrap(), 5.997_807_015_007_687, epsilon = 1e-12);
        assert_abs_diff_eq!(q_inv(1e-3).unwrap(), 3.090_232_306_167_814, epsilon = 1e-12);
    }

    #[test]
    fn q_inv_rejects_out_of_domain() {
        for p in [0.0, 1.0, -0.1, 1.5, f64::NAN] {
            assert!(q_inv(p).is_err(), "p = {p}");
        }
    }

    #[test]
    fn q_inv_round_trip_on_log_grid() {
        let mut p = 1e-9_f64;
        while p < 0.5 {
            let x = q_inv(p).unwrap();
            assert!((q_function(x) - p).abs() <= 1e-12, "p = {p}");
            p *= 1.1;
        }
    }

    #[test]
    fn dispersion_examples() {
        assert_eq!(dispersion(0.0), 0.0);
        assert_abs_diff_eq!(dispersion(1.0), 0.75, epsilon = 1e-15);
        // 1 - 1e-18 rounds to 1.0 in f64
        assert!(dispersion(1e9) >= 1.0 - 1e-17);
        assert!(dispersion(1e6) < 1.0);
    }

    #[test]
    fn rate_examples() {
        assert_eq!(ibl_rate(0.0, 1e7), 0.0);
        assert_abs_diff_eq!(ibl_rate(1.0, 1e7), 1e7, epsilon = 1e-6);
        assert_abs_diff_eq!(ibl_rate(3.0, 1.0), 2.0, epsilon = 1e-15);

        let p = FblParams::new(100, 1e-5, 1.0).unwrap();
        assert_eq!(fbl_rate(0.0, &p), 0.0);
        // 50-digit re-evaluation of 1 - Q^-1(1e-5) log2(e) sqrt(0.75/100)
        assert_abs_diff_eq!(fbl_rate(1.0, &p), 0.467_140_042_477_006_8, epsilon = 1e-12);

        let long = FblParams::new(1_000_000_000_000, 1e-5, 1.0).unwrap();
        assert!((fbl_rate(1.0, &long) - ibl_rate(1.0, 1.0)).abs() < 1e-5);
    }

    #[test]
    fn negative_bound_is_clamped() {
        let p = FblParams::new(2, 1e-5, 1.0).unwrap();
        assert!(rate_bound(0.01, 1.0, p.penalty()) < 0.0);
        assert_eq!(fbl_rate(0.01, &p), 0.0);
    }

    #[test]
    fn params_validation() {
        assert_eq!(FblParams::new(0, 1e-5, 1.0), Err(FblError::Blocklength));
        assert!(matches!(
            FblParams::new(10, 0.5, 1.0),
            Err(FblError::Bler(_))
        ));
        assert!(matches!(
            FblParams::new(10, 1e-3, 0.0),
            Err(FblError::Bandwidth(_))
        ));
        let p = FblParams::new(10, 1e-3, 1.0).unwrap();
        assert!((p.omega - q_inv(1e-3).unwrap() * LOG2_E).abs() <= 1e-9 * p.omega);
    }

    #[test]
    fn dispersion_concave_on_grid() {
        let h = 1e-2;
        let mut g = h;
        while g < 50.0 {
            let d2 = dispersion(g + h) - 2.0 * dispersion(g) + dispersion(g - h);
            assert!(d2 <= 1e-15, "gamma = {g}");
            g += 0.37;
        }
    }

    proptest! {
        #[test]
        fn fbl_below_ibl_and_monotone_in_eta(gamma in 0.0f64..1e4, eta in 1u64..100_000) {
            let a = FblParams::new(eta, 1e-5, 1.0).unwrap();
            let b = FblParams::new(eta + 1 + eta / 3, 1e-5, 1.0).unwrap();
            prop_assert!(fbl_rate(gamma, &a) <= ibl_rate(gamma, 1.0) + 1e-15);
            prop_assert!(fbl_rate(gamma, &a) <= fbl_rate(gamma, &b) + 1e-15);
            prop_assert!(rate_bound(gamma, 1.0, a.penalty()) <= rate_bound(gamma, 1.0, b.penalty()) + 1e-15);
        }

        #[test]
        fn dispersion_monotone(a in 0.0f64..1e6, b in 0.0f64..1e6) {
            let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
            prop_assert!(dispersion(lo) <= dispersion(hi));
            prop_assert!((0.0..1.0).contains(&dispersion(hi)));
        }
    }
}
