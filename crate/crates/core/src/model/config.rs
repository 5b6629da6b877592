use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::fbl::FblParams;
use crate::metrics::ResilienceWeights;

pub fn db_to_linear(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    db_to_linear(dbm - 30.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// Log-distance path loss `PL(d) = reference_db + 10 * exponent * log10(d / 1 m)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathLossModel {
    pub reference_db: f64,
    pub exponent_direct: f64,
    pub exponent_ris: f64,
}

impl Default for PathLossModel {
    fn default() -> Self {
        Self {
            reference_db: 30.0,
            exponent_direct: 3.5,
            exponent_ris: 2.2,
        }
    }
}

impl PathLossModel {
    /// Linear power gain for a link of `distance_m` with the given exponent.
    /// Distances below 1 m are clamped to the reference distance.
    pub fn gain(&self, distance_m: f64, exponent: f64) -> f64 {
        let d = distance_m.max(1.0);
        db_to_linear(-(self.reference_db + 10.0 * exponent * d.log10()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Heights {
    pub ap_m: f64,
    pub ris_m: f64,
    pub user_m: f64,
}

impl Default for Heights {
    fn default() -> Self {
        Self {
            ap_m: 10.0,
            ris_m: 5.0,
            user_m: 1.5,
        }
    }
}

/// All scenario constants, in linear SI units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemConfig {
    pub n_aps: usize,
    pub antennas_per_ap: usize,
    pub n_users: usize,
    pub n_ris_elements: usize,
    pub bandwidth_hz: f64,
    pub noise_power_w: f64,
    /// Per-AP budget, identical for every AP.
    pub max_tx_power_w: f64,
    pub carrier_wavelength_m: f64,
    pub element_spacing_m: f64,
    pub area_half_extent_m: f64,
    pub shadowing_std_db: f64,
    pub bler: f64,
    pub blocklength: u64,
    pub rate_targets_bps: Vec<f64>,
    pub resilience_weights: ResilienceWeights,
    pub t0_max_recovery_s: f64,
    pub coherence_time_s: f64,
    pub per_subproblem_time_s: f64,
    pub penalty_weight: f64,
    pub rng_seed: u64,
    pub path_loss: PathLossModel,
    pub heights: Heights,
}

impl SystemConfig {
    /// Parameter set of the reference deployment: 3 APs with 8 antennas,
    /// 6 users, a 1000-element RIS over a 1 km square, 10 MHz, 37 Mbit/s
    /// targets.
    pub fn reference() -> Self {
        Self {
            n_aps: 3,
            antennas_per_ap: 8,
            n_users: 6,
            n_ris_elements: 1000,
            bandwidth_hz: 10e6,
            noise_power_w: dbm_to_watts(-100.0),
            max_tx_power_w: dbm_to_watts(32.0),
            carrier_wavelength_m: 0.1,
            element_spacing_m: 0.025,
            area_half_extent_m: 500.0,
            shadowing_std_db: 8.0,
            bler: 1e-5,
            blocklength: 1000,
            rate_targets_bps: vec![37e6; 6],
            resilience_weights: ResilienceWeights::new([0.1, 0.5, 0.4])
                .expect("reference weights are valid"),
            t0_max_recovery_s: 5.0,
            coherence_time_s: 0.3,
            per_subproblem_time_s: 0.01,
            penalty_weight: 1e3,
            rng_seed: 0,
            path_loss: PathLossModel::default(),
            heights: Heights::default(),
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        for (field, n) in [
            ("n_aps", self.n_aps),
            ("antennas_per_ap", self.antennas_per_ap),
            ("n_users", self.n_users),
            ("n_ris_elements", self.n_ris_elements),
        ] {
            if n == 0 {
                return Err(ModelError::config(field, "must be at least 1"));
            }
        }
        if self.n_aps > 4 {
            return Err(ModelError::TooManyAps(self.n_aps));
        }
        let positive = [
            ("bandwidth_hz", self.bandwidth_hz),
            ("noise_power_w", self.noise_power_w),
            ("carrier_wavelength_m", self.carrier_wavelength_m),
            ("area_half_extent_m", self.area_half_extent_m),
            ("t0_max_recovery_s", self.t0_max_recovery_s),
            ("coherence_time_s", self.coherence_time_s),
            ("per_subproblem_time_s", self.per_subproblem_time_s),
        ];
        for (field, x) in positive {
            if !(x > 0.0 && x.is_finite()) {
                return Err(ModelError::config(
                    field,
                    format!("must be positive, got {x}"),
                ));
            }
        }
        // A zero budget is a legitimate (degenerate) scenario.
        if !(self.max_tx_power_w >= 0.0 && self.max_tx_power_w.is_finite()) {
            return Err(ModelError::config("max_tx_power_w", "must be nonnegative"));
        }
        for (field, x) in [
            ("element_spacing_m", self.element_spacing_m),
            ("shadowing_std_db", self.shadowing_std_db),
            ("penalty_weight", self.penalty_weight),
        ] {
            if !(x >= 0.0 && x.is_finite()) {
                return Err(ModelError::config(
                    field,
                    format!("must be nonnegative, got {x}"),
                ));
            }
        }
        if !(self.bler > 0.0 && self.bler < 0.5) {
            return Err(ModelError::config(
                "bler",
                format!("must lie in (0, 0.5), got {}", self.bler),
            ));
        }
        if self.blocklength == 0 {
            return Err(ModelError::config("blocklength", "must be at least 1"));
        }
        if self.rate_targets_bps.len() != self.n_users {
            return Err(ModelError::config(
                "rate_targets_bps",
                format!(
                    "expected {} entries, got {}",
                    self.n_users,
                    self.rate_targets_bps.len()
                ),
            ));
        }
        if self
            .rate_targets_bps
            .iter()
            .any(|r| !(*r > 0.0 && r.is_finite()))
        {
            return Err(ModelError::config(
                "rate_targets_bps",
                "targets must be positive",
            ));
        }
        ResilienceWeights::new(self.resilience_weights.as_array())
            .map_err(|e| ModelError::config("resilience_weights", e.to_string()))?;
        Ok(())
    }

    pub fn fbl_params(&self) -> FblParams {
        FblParams::new(self.blocklength, self.bler, self.bandwidth_hz)
            .expect("validated configuration yields valid FBL parameters")
    }

    /// Total transmit antennas `N * L`.
    pub fn total_antennas(&self) -> usize {
        self.n_aps * self.antennas_per_ap
    }

    /// Grid side used to lay out the RIS elements (`ceil(sqrt(M))`).
    pub fn ris_grid_side(&self) -> usize {
        let mut side = (self.n_ris_elements as f64).sqrt().floor() as usize;
        while side * side < self.n_ris_elements {
            side += 1;
        }
        side
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_is_valid() {
        let c = SystemConfig::reference();
        c.validate().unwrap();
        assert!((c.max_tx_power_w - 1.584_893_192).abs() < 1e-8);
        assert!((c.noise_power_w - 1e-13).abs() < 1e-25);
        assert_eq!(c.ris_grid_side(), 32);
    }

    #[test]
    fn validation_names_fields() {
        let mut c = SystemConfig::reference();
        c.n_users = 0;
        assert!(matches!(
            c.validate(),
            Err(ModelError::Config {
                field: "n_users",
                ..
            })
        ));
        let mut c = SystemConfig::reference();
        c.n_aps = 5;
        assert_eq!(c.validate(), Err(ModelError::TooManyAps(5)));
        let mut c = SystemConfig::reference();
        c.bler = 0.7;
        assert!(matches!(
            c.validate(),
            Err(ModelError::Config { field: "bler", .. })
        ));
        let mut c = SystemConfig::reference();
        c.rate_targets_bps.pop();
        assert!(matches!(
            c.validate(),
            Err(ModelError::Config {
                field: "rate_targets_bps",
                ..
            })
        ));
    }

    #[test]
    fn unit_conversions() {
        assert!((dbm_to_watts(30.0) - 1.0).abs() < 1e-15);
        assert!((watts_to_dbm(dbm_to_watts(-100.0)) + 100.0).abs() < 1e-9);
        let pl = PathLossModel::default();
        assert!((pl.gain(10.0, 2.0) - 1e-5).abs() < 1e-18);
        assert_eq!(pl.gain(0.1, 3.5), pl.gain(1.0, 3.5));
    }
}
