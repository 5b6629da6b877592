use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::{
    ignore_branch_registry, policy_registry, Decision, EpisodeContext, ScenarioError,
    DEFAULT_IGNORE_BRANCH, DEFAULT_POLICY, DEFAULT_PROBE_STEPS,
};
use crate::conic::{DEFAULT_SOLVER, DEFAULT_TOL};
use crate::fbl::ibl_rate;
use crate::metrics::{
    absorption, adaptation, adaptation_gap, resilience, time_to_recovery, MetricsError, RateSnapshot,
    RatioMode, Timeline,
};
use crate::model::{
    apply_blockage, generate_channels, generate_topology, sinr_all, ChannelSet, NetworkState, Regime,
    SystemConfig,
};
use crate::sca::{
    alternate, initialize_iterate, AlternateOptions, AlternationTrace, RateModel, StopRule,
};

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeOptions {
    pub policy: String,
    pub ignore_branch: String,
    pub ratio_mode: RatioMode,
    /// `false` runs a control episode without any disruption.
    pub blockage: bool,
    pub probe_steps: usize,
    pub solver: String,
    pub tol: f64,
}

impl Default for EpisodeOptions {
    fn default() -> Self {
        Self {
            policy: DEFAULT_POLICY.to_string(),
            ignore_branch: DEFAULT_IGNORE_BRANCH.to_string(),
            ratio_mode: RatioMode::Capped,
            blockage: true,
            probe_steps: DEFAULT_PROBE_STEPS,
            solver: DEFAULT_SOLVER.to_string(),
            tol: DEFAULT_TOL,
        }
    }
}

impl EpisodeOptions {
    fn alternate(&self, stop: StopRule) -> AlternateOptions {
        AlternateOptions {
            stop,
            max_steps: None,
            solver: self.solver.clone(),
            tol: self.tol,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Setup,
    SteadyState,
    Blockage,
    Decision,
    Recovery,
    Scoring,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Setup => "setup",
            Stage::SteadyState => "steady_state",
            Stage::Blockage => "blockage",
            Stage::Decision => "decision",
            Stage::Recovery => "recovery",
            Stage::Scoring => "scoring",
        }
    }
}

/// `Truncated` means a subproblem solve failed part-way and the stage went
/// on with the last accepted iterate.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "state", rename_all = "snake_case")]
pub enum EpisodeStatus {
    Ok,
    Truncated { stage: Stage },
    Failed { stage: Stage, message: String },
}

impl EpisodeStatus {
    pub fn label(&self) -> String {
        match self {
            EpisodeStatus::Ok => "ok".to_string(),
            EpisodeStatus::Truncated { stage } => format!("truncated:{}", stage.as_str()),
            EpisodeStatus::Failed { stage, .. } => format!("failed:{}", stage.as_str()),
        }
    }

    pub fn is_failed(&self) -> bool {
        matches!(self, EpisodeStatus::Failed { .. })
    }

    fn truncate(&mut self, stage: Stage) {
        if *self == EpisodeStatus::Ok {
            *self = EpisodeStatus::Truncated { stage };
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LabeledTrace {
    pub label: String,
    pub trace: AlternationTrace,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpisodeResult {
    pub seed: u64,
    pub blocklength: u64,
    pub n_ris_elements: usize,
    pub policy: String,
    pub ignore_branch: String,
    pub ratio_mode: RatioMode,
    pub weights: [f64; 3],
    pub disrupted: bool,
    pub blocked_links: Vec<(usize, usize)>,
    pub desired_rates_bps: Vec<f64>,
    pub steady_state_rates_bps: Vec<f64>,
    pub post_blockage_rates_bps: Vec<f64>,
    pub recovered_rates_bps: Vec<f64>,
    pub decision: Option<Decision>,
    pub predicted_recover: Option<f64>,
    pub predicted_ignore: Option<f64>,
    pub r_abs: f64,
    pub r_ada: f64,
    pub r_rec: f64,
    pub r: f64,
    /// Adaptation gap of the rates at `t_q`.
    pub psi_final: f64,
    /// Alternation steps spent before `t_q`.
    pub steps: usize,
    pub timeline: Option<Timeline>,
    pub steady_state_trace: Option<AlternationTrace>,
    pub traces: Vec<LabeledTrace>,
    pub status: EpisodeStatus,
}

impl EpisodeResult {
    fn empty(config: &SystemConfig, seed: u64, options: &EpisodeOptions) -> Self {
        Self {
            seed,
            blocklength: config.blocklength,
            n_ris_elements: config.n_ris_elements,
            policy: options.policy.clone(),
            ignore_branch: options.ignore_branch.clone(),
            ratio_mode: options.ratio_mode,
            weights: config.resilience_weights.as_array(),
            disrupted: options.blockage,
            blocked_links: Vec::new(),
            desired_rates_bps: config.rate_targets_bps.clone(),
            steady_state_rates_bps: Vec::new(),
            post_blockage_rates_bps: Vec::new(),
            recovered_rates_bps: Vec::new(),
            decision: None,
            predicted_recover: None,
            predicted_ignore: None,
            r_abs: f64::NAN,
            r_ada: f64::NAN,
            r_rec: f64::NAN,
            r: f64::NAN,
            psi_final: f64::NAN,
            steps: 0,
            timeline: None,
            steady_state_trace: None,
            traces: Vec::new(),
            status: EpisodeStatus::Ok,
        }
    }

    pub(crate) fn failed(
        config: &SystemConfig,
        seed: u64,
        options: &EpisodeOptions,
        stage: Stage,
        err: impl std::fmt::Display,
    ) -> Self {
        Self::empty(config, seed, options).fail(stage, err)
    }

    fn fail(mut self, stage: Stage, err: impl std::fmt::Display) -> Self {
        self.status = EpisodeStatus::Failed {
            stage,
            message: err.to_string(),
        };
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SteadyState {
    pub state: NetworkState,
    pub trace: AlternationTrace,
}

/// IBL alternation from a random-phase matched-filter start until the
/// budget is spent or the convergence detector fires. The state carries the
/// achievable IBL rates of the final point.
pub fn run_steady_state<R: Rng + ?Sized>(
    channels: &ChannelSet,
    config: &SystemConfig,
    rng: &mut R,
    options: &EpisodeOptions,
) -> Result<SteadyState, ScenarioError> {
    let rate = RateModel::ibl(config.bandwidth_hz);
    let start = initialize_iterate(channels, config, &rate, rng);
    let trace = alternate(
        channels,
        config,
        &rate,
        &start,
        &options.alternate(StopRule::BudgetOrConvergence),
    )?;
    let it = &trace.final_iterate;
    let state = NetworkState {
        beamformers: it.w.clone(),
        phase_vector: it.v.clone(),
        rates_bps: ibl_rates(channels, &it.w, &it.v, config),
        regime: Regime::Ibl,
    };
    Ok(SteadyState { state, trace })
}

fn ibl_rates(
    channels: &ChannelSet,
    w: &DMatrix<Complex64>,
    v: &DVector<Complex64>,
    config: &SystemConfig,
) -> Vec<f64> {
    sinr_all(channels, w, v)
        .into_iter()
        .map(|g| ibl_rate(g, config.bandwidth_hz))
        .collect()
}

/// IBL rates of the unchanged `(w, v)` on the blocked channels, each capped
/// at the rate allocated before the disruption.
pub fn measure_absorption(
    state: &NetworkState,
    blocked: &ChannelSet,
    config: &SystemConfig,
) -> Result<RateSnapshot, MetricsError> {
    let blocked_rates = ibl_rates(blocked, &state.beamformers, &state.phase_vector, config);
    let achieved = state
        .rates_bps
        .iter()
        .zip(blocked_rates)
        .map(|(&alloc, r)| alloc.min(r))
        .collect();
    RateSnapshot::new(achieved, config.rate_targets_bps.clone())
}

/// The blocklength-independent part of an episode: geometry, channels,
/// steady state, blockage and absorption.
#[derive(Debug, Clone)]
pub struct Baseline {
    pub seed: u64,
    pub config: SystemConfig,
    pub channels: ChannelSet,
    pub blocked: ChannelSet,
    pub steady: SteadyState,
    pub absorption: RateSnapshot,
}

pub fn prepare_baseline(
    config: &SystemConfig,
    seed: u64,
    options: &EpisodeOptions,
) -> Result<Baseline, (Stage, ScenarioError)> {
    let setup = |e: ScenarioError| (Stage::Setup, e);
    config.validate().map_err(|e| setup(e.into()))?;
    policy_registry()
        .create(&options.policy)
        .map_err(|e| setup(e.into()))?;
    ignore_branch_registry()
        .create(&options.ignore_branch)
        .map_err(|e| setup(e.into()))?;

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let topology = generate_topology(config, &mut rng).map_err(|e| setup(e.into()))?;
    let channels = generate_channels(&topology, config, &mut rng).map_err(|e| setup(e.into()))?;
    let steady = run_steady_state(&channels, config, &mut rng, options)
        .map_err(|e| (Stage::SteadyState, e))?;
    let blocked = if options.blockage {
        apply_blockage(&channels).map_err(|e| (Stage::Blockage, e.into()))?
    } else {
        channels.clone()
    };
    let absorption = measure_absorption(&steady.state, &blocked, config)
        .map_err(|e| (Stage::Blockage, e.into()))?;
    Ok(Baseline {
        seed,
        config: config.clone(),
        channels,
        blocked,
        steady,
        absorption,
    })
}

/// Finishes an episode from its baseline at blocklength `eta`.
pub fn respond(baseline: &Baseline, eta: u64, options: &EpisodeOptions) -> EpisodeResult {
    let mut config = baseline.config.clone();
    config.blocklength = eta;
    let mut out = EpisodeResult::empty(&config, baseline.seed, options);
    if let Err(e) = config.validate() {
        return out.fail(Stage::Setup, e);
    }
    out.blocked_links = baseline.blocked.blocked_links().iter().copied().collect();
    out.steady_state_rates_bps = baseline.steady.state.rates_bps.clone();
    out.post_blockage_rates_bps = baseline.absorption.achieved().to_vec();
    out.steady_state_trace = Some(baseline.steady.trace.clone());
    if baseline.steady.trace.failure.is_some() {
        out.status.truncate(Stage::SteadyState);
    }

    if !options.blockage {
        // Nothing was disrupted, so nothing is lost, adapted or late.
        out.decision = Some(Decision::Ignore);
        out.recovered_rates_bps = out.post_blockage_rates_bps.clone();
        out.psi_final = adaptation_gap(&baseline.absorption);
        out.timeline = Timeline::new(0.0, 0.0, config.t0_max_recovery_s).ok();
        (out.r_abs, out.r_ada, out.r_rec) = (1.0, 1.0, 1.0);
        out.r = resilience(1.0, 1.0, 1.0, &config.resilience_weights);
        return out;
    }

    let ctx = EpisodeContext {
        blocked: &baseline.blocked,
        state: &baseline.steady.state,
        config: &config,
        absorption: &baseline.absorption,
        options,
    };
    let outcome = match policy_registry()
        .create(&options.policy)
        .map_err(ScenarioError::from)
        .and_then(|p| p.decide(&ctx))
    {
        Ok(o) => o,
        Err(e) => return out.fail(Stage::Decision, e),
    };
    out.decision = Some(outcome.decision);
    out.predicted_recover = outcome.predicted_recover;
    out.predicted_ignore = outcome.predicted_ignore;
    if let Some(probe) = outcome.probe {
        if probe.failure.is_some() {
            out.status.truncate(Stage::Decision);
        }
        out.traces.push(LabeledTrace {
            label: "probe".into(),
            trace: probe,
        });
    }

    let (rates, tq, steps) = match outcome.decision {
        Decision::Recover => {
            let (rate, start) = ctx.fbl_start();
            let trace = match alternate(
                ctx.blocked,
                &config,
                &rate,
                &start,
                &options.alternate(StopRule::BudgetOnly),
            ) {
                Ok(t) => t,
                Err(e) => return out.fail(Stage::Recovery, e),
            };
            if trace.failure.is_some() {
                out.status.truncate(Stage::Recovery);
            }
            let z = trace.convergence_step();
            let rates = trace.rates_at(z).to_vec();
            out.traces.push(LabeledTrace {
                label: "recovery".into(),
                trace,
            });
            (rates, z as f64 * config.per_subproblem_time_s, z)
        }
        Decision::Ignore => {
            let branch = match ignore_branch_registry().create(&options.ignore_branch) {
                Ok(b) => b,
                Err(e) => return out.fail(Stage::Recovery, e),
            };
            match branch.respond(&ctx) {
                Ok(o) => {
                    if let Some(trace) = o.trace {
                        if trace.failure.is_some() {
                            out.status.truncate(Stage::Recovery);
                        }
                        out.traces.push(LabeledTrace {
                            label: branch.name().into(),
                            trace,
                        });
                    }
                    (o.rates_bps, 0.0, 0)
                }
                Err(e) => return out.fail(Stage::Recovery, e),
            }
        }
    };

    let scored = (|| -> Result<_, MetricsError> {
        let mode = options.ratio_mode;
        let at_tq = RateSnapshot::new(rates.clone(), config.rate_targets_bps.clone())?;
        let timeline = Timeline::new(0.0, tq, config.t0_max_recovery_s)?;
        let r_abs = absorption(&baseline.absorption, mode);
        let r_ada = adaptation(&at_tq, mode);
        let r_rec = match outcome.decision {
            Decision::Recover => time_to_recovery(&timeline),
            Decision::Ignore => 1.0,
        };
        Ok((timeline, r_abs, r_ada, r_rec, adaptation_gap(&at_tq)))
    })();
    match scored {
        Ok((timeline, r_abs, r_ada, r_rec, gap)) => {
            out.recovered_rates_bps = rates;
            out.timeline = Some(timeline);
            (out.r_abs, out.r_ada, out.r_rec) = (r_abs, r_ada, r_rec);
            out.r = resilience(r_abs, r_ada, r_rec, &config.resilience_weights);
            out.psi_final = gap;
            out.steps = steps;
            out
        }
        Err(e) => out.fail(Stage::Scoring, e),
    }
}

/// Runs one episode with all randomness drawn from `seed`.
pub fn run_episode(config: &SystemConfig, seed: u64, options: &EpisodeOptions) -> EpisodeResult {
    match prepare_baseline(config, seed, options) {
        Ok(baseline) => respond(&baseline, config.blocklength, options),
        Err((stage, e)) => EpisodeResult::failed(config, seed, options, stage, e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fbl::ibl_rate;
    use crate::model::dbm_to_watts;

    pub(crate) fn desk() -> SystemConfig {
        let mut c = SystemConfig::reference();
        c.n_aps = 2;
        c.antennas_per_ap = 2;
        c.n_users = 2;
        c.n_ris_elements = 4;
        c.area_half_extent_m = 100.0;
        c.rate_targets_bps = vec![20e6; 2];
        c
    }

    #[test]
    fn control_run_scores_one() {
        let opts = EpisodeOptions {
            blockage: false,
            ..Default::default()
        };
        let res = run_episode(&desk(), 3, &opts);
        assert_eq!(res.status, EpisodeStatus::Ok);
        assert_eq!(res.r, 1.0);
        assert_eq!(res.decision, Some(Decision::Ignore));
        assert!(res.blocked_links.is_empty());
        assert_eq!(res.post_blockage_rates_bps, res.steady_state_rates_bps);
    }

    #[test]
    fn episode_invariants() {
        for policy in ["decide", "always-recover", "always-ignore"] {
            let opts = EpisodeOptions {
                policy: policy.into(),
                ..Default::default()
            };
            let res = run_episode(&desk(), 1, &opts);
            assert!(!res.status.is_failed(), "{:?}", res.status);
            assert_eq!(res.blocked_links.len(), 1);
            let [l1, l2, l3] = res.weights;
            assert!((res.r - (l1 * res.r_abs + l2 * res.r_ada + l3 * res.r_rec)).abs() <= 1e-12);
            match res.decision.unwrap() {
                Decision::Ignore => {
                    assert_eq!(res.recovered_rates_bps, res.post_blockage_rates_bps);
                    assert!(res.traces.iter().all(|t| t.label == "probe"));
                    assert_eq!(res.r_rec, 1.0);
                }
                Decision::Recover => {
                    assert_eq!(res.traces.last().unwrap().label, "recovery");
                    // z* * 10 ms never exceeds T_0 = 5 s
                    assert_eq!(res.r_rec, 1.0);
                }
            }
        }
    }

    #[test]
    fn single_user_steady_state_matches_matched_filter() {
        let mut c = desk();
        c.n_users = 1;
        c.n_aps = 1;
        c.rate_targets_bps = vec![1e9];
        c.n_ris_elements = 1;
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let topo = generate_topology(&c, &mut rng).unwrap();
        let ch = generate_channels(&topo, &c, &mut rng).unwrap();
        let steady = run_steady_state(&ch, &c, &mut rng, &EpisodeOptions::default()).unwrap();
        let heff = crate::model::effective_channel(&ch, &steady.state.phase_vector, 0);
        let oracle = ibl_rate(
            c.max_tx_power_w * heff.norm_squared() / ch.noise_power_w(),
            c.bandwidth_hz,
        );
        let r = steady.state.rates_bps[0];
        assert!((r - oracle).abs() <= 0.01 * oracle, "{r} vs {oracle}");
    }

    #[test]
    fn zero_budget_gives_zero_rates() {
        let mut c = desk();
        c.max_tx_power_w = 0.0;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let topo = generate_topology(&c, &mut rng).unwrap();
        let ch = generate_channels(&topo, &c, &mut rng).unwrap();
        let steady = run_steady_state(&ch, &c, &mut rng, &EpisodeOptions::default()).unwrap();
        assert!(steady.state.rates_bps.iter().all(|&r| r == 0.0));
        let snap = RateSnapshot::new(steady.state.rates_bps.clone(), c.rate_targets_bps.clone()).unwrap();
        assert_eq!(adaptation_gap(&snap), 2.0);
        // the SINR slack floor leaves a few bit/s of slack rate
        let psi = *steady.trace.psi_sequence().last().unwrap();
        assert!((psi - 2.0).abs() < 1e-5);
    }

    #[test]
    fn absorption_without_blockage_is_identity() {
        let c = desk();
        let base = prepare_baseline(
            &c,
            2,
            &EpisodeOptions {
                blockage: false,
                ..Default::default()
            },
        )
        .unwrap();
        assert_eq!(base.absorption.achieved(), &base.steady.state.rates_bps[..]);
    }

    #[test]
    fn absorption_of_isolated_user_is_unchanged() {
        let c = desk();
        let base = prepare_baseline(&c, 5, &EpisodeOptions::default()).unwrap();
        let (_, k) = *base.blocked.blocked_links().iter().next().unwrap();
        let other = 1 - k;
        assert_eq!(
            base.absorption.achieved()[other],
            base.steady.state.rates_bps[other]
        );
    }

    #[test]
    fn absorption_collapses_when_only_path_removed() {
        let mut c = desk();
        c.n_aps = 1;
        c.n_users = 1;
        c.rate_targets_bps = vec![20e6];
        c.max_tx_power_w = dbm_to_watts(20.0);
        let base = prepare_baseline(&c, 0, &EpisodeOptions::default()).unwrap();
        let w = &base.steady.state.beamformers;
        let v = &base.steady.state.phase_vector;
        let gamma = sinr_all(&base.blocked, w, v)[0];
        let expected = base.steady.state.rates_bps[0].min(ibl_rate(gamma, c.bandwidth_hz));
        assert_eq!(base.absorption.achieved()[0], expected);
        assert!(expected < 0.5 * base.steady.state.rates_bps[0]);
    }

    #[test]
    fn unknown_policy_is_a_setup_failure() {
        let opts = EpisodeOptions {
            policy: "coin-flip".into(),
            ..Default::default()
        };
        let res = run_episode(&desk(), 0, &opts);
        assert!(matches!(
            res.status,
            EpisodeStatus::Failed {
                stage: Stage::Setup,
                ..
            }
        ));
        assert!(res.r.is_nan());
    }

    #[test]
    fn tiny_blocklength_ignores() {
        let mut c = desk();
        c.blocklength = 1;
        let res = run_episode(&c, 1, &EpisodeOptions::default());
        assert_eq!(res.decision, Some(Decision::Ignore));
        assert!(res.predicted_ignore.unwrap() > res.predicted_recover.unwrap());
    }

    #[test]
    fn deterministic() {
        let a = run_episode(&desk(), 9, &EpisodeOptions::default());
        let b = run_episode(&desk(), 9, &EpisodeOptions::default());
        assert_eq!(a.recovered_rates_bps, b.recovered_rates_bps);
        assert_eq!(a.r.to_bits(), b.r.to_bits());
    }
}
