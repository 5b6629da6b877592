//! Experiment files: sectioned TOML with unit-suffixed keys.
//!
//! Every key is optional. Missing keys take the reference-deployment
//! defaults and are listed in [`ExperimentSpec::defaults_applied`]; the
//! fully resolved file ([`ExperimentSpec::resolved_toml`]) loads back to an
//! identical spec.

use std::path::{Path, PathBuf};

use ris_fbl_core::metrics::{RatioMode, ResilienceWeights};
use ris_fbl_core::model::{dbm_to_watts, Heights, ModelError, PathLossModel, SystemConfig};
use ris_fbl_core::scenario::{
    ignore_branch_registry, policy_registry, EpisodeOptions, DEFAULT_IGNORE_BRANCH,
    DEFAULT_POLICY, DEFAULT_PROBE_STEPS,
};
use ris_fbl_core::conic::{solver_registry, DEFAULT_SOLVER, DEFAULT_TOL};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum SpecError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
    #[error("invalid `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: &str, message: impl Into<String>) -> SpecError {
    SpecError::Invalid {
        field: field.to_string(),
        message: message.into(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    #[default]
    Log,
    Linear,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub n_aps: Option<usize>,
    pub antennas_per_ap: Option<usize>,
    pub n_users: Option<usize>,
    pub n_ris_elements: Option<usize>,
    pub bandwidth_hz: Option<f64>,
    pub noise_power_dbm: Option<f64>,
    pub max_tx_power_dbm: Option<f64>,
    pub carrier_wavelength_m: Option<f64>,
    pub element_spacing_m: Option<f64>,
    pub area_half_extent_m: Option<f64>,
    pub shadowing_std_db: Option<f64>,
    pub path_loss_reference_db: Option<f64>,
    pub path_loss_exponent_direct: Option<f64>,
    pub path_loss_exponent_ris: Option<f64>,
    pub ap_height_m: Option<f64>,
    pub ris_height_m: Option<f64>,
    pub user_height_m: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FblSection {
    pub bler: Option<f64>,
    pub blocklength_symbols: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MetricsSection {
    pub resilience_weights: Option<[f64; 3]>,
    pub t0_max_recovery_s: Option<f64>,
    pub ratio_mode: Option<RatioMode>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScaSection {
    pub coherence_time_s: Option<f64>,
    pub per_subproblem_time_s: Option<f64>,
    pub penalty_weight: Option<f64>,
    pub solver: Option<String>,
    pub tolerance: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSection {
    pub rate_target_mbps: Option<f64>,
    pub policy: Option<String>,
    pub ignore_branch: Option<String>,
    pub probe_steps: Option<usize>,
    pub blockage: Option<bool>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSection {
    pub eta_grid_symbols: Option<Vec<u64>>,
    pub m_grid: Option<Vec<usize>>,
    pub rate_target_grid_mbps: Option<Vec<f64>>,
    pub seeds: Option<Vec<u64>>,
    pub eta_axis: Option<Axis>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub emit_plots: Option<bool>,
}

/// The file as written, section by section.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSpec {
    #[serde(default)]
    pub model: ModelSection,
    #[serde(default)]
    pub fbl: FblSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub sca: ScaSection,
    #[serde(default)]
    pub scenario: ScenarioSection,
    #[serde(default)]
    pub sweep: SweepSection,
    #[serde(default)]
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepSpec {
    pub eta_grid: Vec<u64>,
    pub m_grid: Vec<usize>,
    pub rate_target_grid_bps: Vec<f64>,
    pub seeds: Vec<u64>,
    pub eta_axis: Axis,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentSpec {
    pub system: SystemConfig,
    pub episode: EpisodeOptions,
    pub sweep: SweepSpec,
    pub output_dir: PathBuf,
    pub emit_plots: bool,
    /// Dotted keys that were missing and took their default.
    pub defaults_applied: Vec<String>,
    resolved: RawSpec,
}

struct Defaults<'a>(&'a mut Vec<String>);

impl Defaults<'_> {
    fn take<T>(&mut self, key: &str, slot: &mut Option<T>, default: T) -> T
    where
        T: Clone,
    {
        if slot.is_none() {
            self.0.push(key.to_string());
            *slot = Some(default);
        }
        slot.clone().expect("filled above")
    }
}

fn line_of(text: &str, offset: usize) -> usize {
    text[..offset.min(text.len())].matches('\n').count() + 1
}

pub fn parse_spec(text: &str, path: &Path) -> Result<ExperimentSpec, SpecError> {
    let raw: RawSpec = toml::from_str(text).map_err(|e| SpecError::Parse {
        path: path.to_path_buf(),
        line: e.span().map(|s| line_of(text, s.start)).unwrap_or(1),
        message: e.message().to_string(),
    })?;
    resolve(raw)
}

pub fn load_spec(path: &Path) -> Result<ExperimentSpec, SpecError> {
    let text = std::fs::read_to_string(path).map_err(|source| SpecError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_spec(&text, path)
}

fn resolve(mut raw: RawSpec) -> Result<ExperimentSpec, SpecError> {
    let reference = SystemConfig::reference();
    let mut applied = Vec::new();
    let mut d = Defaults(&mut applied);

    let m = &mut raw.model;
    let n_aps = d.take("model.n_aps", &mut m.n_aps, reference.n_aps);
    let antennas_per_ap = d.take("model.antennas_per_ap", &mut m.antennas_per_ap, reference.antennas_per_ap);
    let n_users = d.take("model.n_users", &mut m.n_users, reference.n_users);
    let n_ris_elements = d.take("model.n_ris_elements", &mut m.n_ris_elements, reference.n_ris_elements);
    let bandwidth_hz = d.take("model.bandwidth_hz", &mut m.bandwidth_hz, reference.bandwidth_hz);
    let noise_dbm = d.take("model.noise_power_dbm", &mut m.noise_power_dbm, -100.0);
    let power_dbm = d.take("model.max_tx_power_dbm", &mut m.max_tx_power_dbm, 32.0);
    let wavelength = d.take(
        "model.carrier_wavelength_m",
        &mut m.carrier_wavelength_m,
        reference.carrier_wavelength_m,
    );
    let spacing = d.take("model.element_spacing_m", &mut m.element_spacing_m, reference.element_spacing_m);
    let half = d.take("model.area_half_extent_m", &mut m.area_half_extent_m, reference.area_half_extent_m);
    let shadowing = d.take("model.shadowing_std_db", &mut m.shadowing_std_db, reference.shadowing_std_db);
    let pl = PathLossModel {
        reference_db: d.take(
            "model.path_loss_reference_db",
            &mut m.path_loss_reference_db,
            reference.path_loss.reference_db,
        ),
        exponent_direct: d.take(
            "model.path_loss_exponent_direct",
            &mut m.path_loss_exponent_direct,
            reference.path_loss.exponent_direct,
        ),
        exponent_ris: d.take(
            "model.path_loss_exponent_ris",
            &mut m.path_loss_exponent_ris,
            reference.path_loss.exponent_ris,
        ),
    };
    let heights = Heights {
        ap_m: d.take("model.ap_height_m", &mut m.ap_height_m, reference.heights.ap_m),
        ris_m: d.take("model.ris_height_m", &mut m.ris_height_m, reference.heights.ris_m),
        user_m: d.take("model.user_height_m", &mut m.user_height_m, reference.heights.user_m),
    };

    let f = &mut raw.fbl;
    let bler = d.take("fbl.bler", &mut f.bler, reference.bler);
    let blocklength = d.take("fbl.blocklength_symbols", &mut f.blocklength_symbols, reference.blocklength);

    let mt = &mut raw.metrics;
    let weights = d.take(
        "metrics.resilience_weights",
        &mut mt.resilience_weights,
        reference.resilience_weights.as_array(),
    );
    let t0 = d.take("metrics.t0_max_recovery_s", &mut mt.t0_max_recovery_s, reference.t0_max_recovery_s);
    let ratio_mode = d.take("metrics.ratio_mode", &mut mt.ratio_mode, RatioMode::Capped);

    let s = &mut raw.sca;
    let tc = d.take("sca.coherence_time_s", &mut s.coherence_time_s, reference.coherence_time_s);
    let tcalc = d.take(
        "sca.per_subproblem_time_s",
        &mut s.per_subproblem_time_s,
        reference.per_subproblem_time_s,
    );
    let alpha = d.take("sca.penalty_weight", &mut s.penalty_weight, reference.penalty_weight);
    let solver = d.take("sca.solver", &mut s.solver, DEFAULT_SOLVER.to_string());
    let tol = d.take("sca.tolerance", &mut s.tolerance, DEFAULT_TOL);

    let sc = &mut raw.scenario;
    let rate_mbps = d.take(
        "scenario.rate_target_mbps",
        &mut sc.rate_target_mbps,
        reference.rate_targets_bps[0] / 1e6,
    );
    let policy = d.take("scenario.policy", &mut sc.policy, DEFAULT_POLICY.to_string());
    let ignore_branch = d.take(
        "scenario.ignore_branch",
        &mut sc.ignore_branch,
        DEFAULT_IGNORE_BRANCH.to_string(),
    );
    let probe_steps = d.take("scenario.probe_steps", &mut sc.probe_steps, DEFAULT_PROBE_STEPS);
    let blockage = d.take("scenario.blockage", &mut sc.blockage, true);
    let seed = d.take("scenario.seed", &mut sc.seed, reference.rng_seed);

    let sw = &mut raw.sweep;
    let eta_grid = d.take(
        "sweep.eta_grid_symbols",
        &mut sw.eta_grid_symbols,
        vec![blocklength],
    );
    let m_grid = d.take("sweep.m_grid", &mut sw.m_grid, vec![n_ris_elements]);
    let rate_grid = d.take(
        "sweep.rate_target_grid_mbps",
        &mut sw.rate_target_grid_mbps,
        vec![rate_mbps],
    );
    let seeds = d.take("sweep.seeds", &mut sw.seeds, (0..10).collect());
    let eta_axis = d.take("sweep.eta_axis", &mut sw.eta_axis, Axis::Log);

    let o = &mut raw.output;
    let output_dir = d.take("output.dir", &mut o.dir, PathBuf::from("out"));
    let emit_plots = d.take("output.emit_plots", &mut o.emit_plots, true);

    let resilience_weights = ResilienceWeights::new(weights)
        .map_err(|e| invalid("resilience_weights", e.to_string()))?;
    let system = SystemConfig {
        n_aps,
        antennas_per_ap,
        n_users,
        n_ris_elements,
        bandwidth_hz,
        noise_power_w: dbm_to_watts(noise_dbm),
        max_tx_power_w: dbm_to_watts(power_dbm),
        carrier_wavelength_m: wavelength,
        element_spacing_m: spacing,
        area_half_extent_m: half,
        shadowing_std_db: shadowing,
        bler,
        blocklength,
        rate_targets_bps: vec![rate_mbps * 1e6; n_users],
        resilience_weights,
        t0_max_recovery_s: t0,
        coherence_time_s: tc,
        per_subproblem_time_s: tcalc,
        penalty_weight: alpha,
        rng_seed: seed,
        path_loss: pl,
        heights,
    };
    system.validate().map_err(|e| match e {
        ModelError::Config { field, reason } => invalid(field, reason),
        ModelError::TooManyAps(_) => invalid("n_aps", e.to_string()),
        other => invalid("model", other.to_string()),
    })?;

    for (field, empty) in [
        ("sweep.eta_grid_symbols", eta_grid.is_empty()),
        ("sweep.m_grid", m_grid.is_empty()),
        ("sweep.rate_target_grid_mbps", rate_grid.is_empty()),
        ("sweep.seeds", seeds.is_empty()),
    ] {
        if empty {
            return Err(invalid(field, "grid must not be empty"));
        }
    }
    if eta_grid.contains(&0) {
        return Err(invalid("sweep.eta_grid_symbols", "blocklengths must be at least 1"));
    }
    if m_grid.contains(&0) {
        return Err(invalid("sweep.m_grid", "RIS sizes must be at least 1"));
    }
    if rate_grid.iter().any(|r| !(*r > 0.0 && r.is_finite())) {
        return Err(invalid("sweep.rate_target_grid_mbps", "targets must be positive"));
    }
    if !policy_registry().contains(&policy) {
        return Err(invalid(
            "scenario.policy",
            format!("unknown policy (available: {})", policy_registry().names().join(", ")),
        ));
    }
    if !ignore_branch_registry().contains(&ignore_branch) {
        return Err(invalid(
            "scenario.ignore_branch",
            format!(
                "unknown branch (available: {})",
                ignore_branch_registry().names().join(", ")
            ),
        ));
    }
    if !solver_registry().contains(&solver) {
        return Err(invalid(
            "sca.solver",
            format!("unknown solver (available: {})", solver_registry().names().join(", ")),
        ));
    }
    if !(1e-10..=1e-4).contains(&tol) {
        return Err(invalid("sca.tolerance", "must lie in [1e-10, 1e-4]"));
    }

    Ok(ExperimentSpec {
        system,
        episode: EpisodeOptions {
            policy,
            ignore_branch,
            ratio_mode,
            blockage,
            probe_steps,
            solver,
            tol,
        },
        sweep: SweepSpec {
            eta_grid,
            m_grid,
            rate_target_grid_bps: rate_grid.iter().map(|r| r * 1e6).collect(),
            seeds,
            eta_axis,
        },
        output_dir,
        emit_plots,
        defaults_applied: applied,
        resolved: raw,
    })
}

impl ExperimentSpec {
    /// The spec with every key spelled out.
    pub fn resolved(&self) -> &RawSpec {
        &self.resolved
    }

    pub fn resolved_toml(&self) -> String {
        toml::to_string(&self.resolved).expect("resolved spec serializes")
    }

    /// Keeps `resolved_toml` in step with command-line overrides.
    pub fn set_seed(&mut self, seed: u64) {
        self.system.rng_seed = seed;
        self.resolved.scenario.seed = Some(seed);
    }

    pub fn set_output_dir(&mut self, dir: PathBuf) {
        self.resolved.output.dir = Some(dir.clone());
        self.output_dir = dir;
    }

    pub fn set_emit_plots(&mut self, on: bool) {
        self.emit_plots = on;
        self.resolved.output.emit_plots = Some(on);
    }

    pub fn set_ignore_branch(&mut self, name: &str) -> Result<(), SpecError> {
        if !ignore_branch_registry().contains(name) {
            return Err(invalid(
                "scenario.ignore_branch",
                format!(
                    "unknown branch `{name}` (available: {})",
                    ignore_branch_registry().names().join(", ")
                ),
            ));
        }
        self.episode.ignore_branch = name.to_string();
        self.resolved.scenario.ignore_branch = Some(name.to_string());
        Ok(())
    }

    pub fn set_ratio_mode(&mut self, mode: RatioMode) {
        self.episode.ratio_mode = mode;
        self.resolved.metrics.ratio_mode = Some(mode);
    }

    pub fn set_blockage(&mut self, on: bool) {
        self.episode.blockage = on;
        self.resolved.scenario.blockage = Some(on);
    }

    /// System configuration for one rate target of the sweep.
    pub fn system_for_target(&self, rate_bps: f64) -> SystemConfig {
        let mut c = self.system.clone();
        c.rate_targets_bps = vec![rate_bps; c.n_users];
        c
    }
}
