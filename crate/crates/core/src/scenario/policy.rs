use std::sync::OnceLock;

use super::{Decision, EpisodeOptions, ScenarioError, DEFAULT_IGNORE_BRANCH, DEFAULT_POLICY};
use crate::metrics::{absorption, adaptation, resilience, time_to_recovery, RateSnapshot, Timeline};
use crate::model::{ChannelSet, NetworkState, SystemConfig};
use crate::registry::Registry;
use crate::sca::{alternate, AlternateOptions, AlternationTrace, Iterate, RateModel, StopRule};

/// Everything a policy or ignore branch may look at once the disruption
/// has been absorbed.
#[derive(Debug, Clone, Copy)]
pub struct EpisodeContext<'a> {
    pub blocked: &'a ChannelSet,
    pub state: &'a NetworkState,
    pub config: &'a SystemConfig,
    pub absorption: &'a RateSnapshot,
    pub options: &'a EpisodeOptions,
}

impl EpisodeContext<'_> {
    /// FBL warm start at the degraded operating point.
    pub(crate) fn fbl_start(&self) -> (RateModel, Iterate) {
        let rate = RateModel::fbl(&self.config.fbl_params());
        let start = Iterate::from_beamformers(
            self.blocked,
            self.state.beamformers.clone(),
            self.state.phase_vector.clone(),
            &self.config.rate_targets_bps,
            &rate,
        );
        (rate, start)
    }

    pub(crate) fn alternate_options(&self, stop: StopRule, max_steps: Option<usize>) -> AlternateOptions {
        AlternateOptions {
            stop,
            max_steps,
            solver: self.options.solver.clone(),
            tol: self.options.tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecisionOutcome {
    pub decision: Decision,
    pub probe: Option<AlternationTrace>,
    pub predicted_recover: Option<f64>,
    pub predicted_ignore: Option<f64>,
}

impl DecisionOutcome {
    fn fixed(decision: Decision) -> Self {
        Self {
            decision,
            probe: None,
            predicted_recover: None,
            predicted_ignore: None,
        }
    }
}

pub trait RecoveryPolicy: Send + Sync {
    fn name(&self) -> &'static str;
    fn decide(&self, ctx: &EpisodeContext<'_>) -> Result<DecisionOutcome, ScenarioError>;
}

/// Probes a few FBL steps and picks the branch with the higher predicted `r`.
#[derive(Debug, Clone, Copy, Default)]
pub struct Decide;

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysRecover;

#[derive(Debug, Clone, Copy, Default)]
pub struct AlwaysIgnore;

impl RecoveryPolicy for Decide {
    fn name(&self) -> &'static str {
        DEFAULT_POLICY
    }

    fn decide(&self, ctx: &EpisodeContext<'_>) -> Result<DecisionOutcome, ScenarioError> {
        decide_recovery(ctx)
    }
}

impl RecoveryPolicy for AlwaysRecover {
    fn name(&self) -> &'static str {
        "always-recover"
    }

    fn decide(&self, _: &EpisodeContext<'_>) -> Result<DecisionOutcome, ScenarioError> {
        Ok(DecisionOutcome::fixed(Decision::Recover))
    }
}

impl RecoveryPolicy for AlwaysIgnore {
    fn name(&self) -> &'static str {
        "always-ignore"
    }

    fn decide(&self, _: &EpisodeContext<'_>) -> Result<DecisionOutcome, ScenarioError> {
        Ok(DecisionOutcome::fixed(Decision::Ignore))
    }
}

/// Runs `probe_steps` FBL alternation steps from the degraded point and
/// compares the predicted `r` of recovering (probe rates at the probe's
/// end) with that of ignoring (degraded IBL rates, `r_rec = 1`).
/// Ties go to recovery.
pub fn decide_recovery(ctx: &EpisodeContext<'_>) -> Result<DecisionOutcome, ScenarioError> {
    let config = ctx.config;
    let mode = ctx.options.ratio_mode;
    let weights = &config.resilience_weights;
    let (rate, start) = ctx.fbl_start();
    let probe = alternate(
        ctx.blocked,
        config,
        &rate,
        &start,
        &ctx.alternate_options(StopRule::BudgetOnly, Some(ctx.options.probe_steps)),
    )?;
    let z = probe.steps.len();
    let r_abs = absorption(ctx.absorption, mode);

    let probe_rates = RateSnapshot::new(probe.rates_at(z).to_vec(), config.rate_targets_bps.clone())?;
    let timeline = Timeline::new(
        0.0,
        z as f64 * config.per_subproblem_time_s,
        config.t0_max_recovery_s,
    )?;
    let recover = resilience(
        r_abs,
        adaptation(&probe_rates, mode),
        time_to_recovery(&timeline),
        weights,
    );
    let ignore = resilience(r_abs, adaptation(ctx.absorption, mode), 1.0, weights);
    Ok(DecisionOutcome {
        decision: if recover >= ignore {
            Decision::Recover
        } else {
            Decision::Ignore
        },
        probe: Some(probe),
        predicted_recover: Some(recover),
        predicted_ignore: Some(ignore),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IgnoreOutcome {
    pub rates_bps: Vec<f64>,
    pub trace: Option<AlternationTrace>,
}

/// What the network does with its configuration when it ignores the
/// disruption.
pub trait IgnoreBranch: Send + Sync {
    fn name(&self) -> &'static str;
    fn respond(&self, ctx: &EpisodeContext<'_>) -> Result<IgnoreOutcome, ScenarioError>;
}

/// Keeps the pre-blockage beamformers and phases.
#[derive(Debug, Clone, Copy, Default)]
pub struct Stale;

/// Re-optimizes under IBL on the blocked channels.
#[derive(Debug, Clone, Copy, Default)]
pub struct Reoptimize;

impl IgnoreBranch for Stale {
    fn name(&self) -> &'static str {
        DEFAULT_IGNORE_BRANCH
    }

    fn respond(&self, ctx: &EpisodeContext<'_>) -> Result<IgnoreOutcome, ScenarioError> {
        Ok(IgnoreOutcome {
            rates_bps: ctx.absorption.achieved().to_vec(),
            trace: None,
        })
    }
}

impl IgnoreBranch for Reoptimize {
    fn name(&self) -> &'static str {
        "reoptimize"
    }

    fn respond(&self, ctx: &EpisodeContext<'_>) -> Result<IgnoreOutcome, ScenarioError> {
        let rate = RateModel::ibl(ctx.config.bandwidth_hz);
        let start = Iterate::from_beamformers(
            ctx.blocked,
            ctx.state.beamformers.clone(),
            ctx.state.phase_vector.clone(),
            &ctx.config.rate_targets_bps,
            &rate,
        );
        let trace = alternate(
            ctx.blocked,
            ctx.config,
            &rate,
            &start,
            &ctx.alternate_options(StopRule::BudgetOrConvergence, None),
        )?;
        Ok(IgnoreOutcome {
            rates_bps: trace.final_rates_bps().to_vec(),
            trace: Some(trace),
        })
    }
}

pub fn policy_registry() -> &'static Registry<dyn RecoveryPolicy> {
    static REGISTRY: OnceLock<Registry<dyn RecoveryPolicy>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn RecoveryPolicy> = Registry::new("recovery policy");
        r.register(DEFAULT_POLICY, || Box::new(Decide) as Box<dyn RecoveryPolicy>);
        r.register("always-recover", || {
            Box::new(AlwaysRecover) as Box<dyn RecoveryPolicy>
        });
        r.register("always-ignore", || {
            Box::new(AlwaysIgnore) as Box<dyn RecoveryPolicy>
        });
        r
    })
}

pub fn ignore_branch_registry() -> &'static Registry<dyn IgnoreBranch> {
    static REGISTRY: OnceLock<Registry<dyn IgnoreBranch>> = OnceLock::new();
    REGISTRY.get_or_init(|| {
        let mut r: Registry<dyn IgnoreBranch> = Registry::new("ignore branch");
        r.register(DEFAULT_IGNORE_BRANCH, || Box::new(Stale) as Box<dyn IgnoreBranch>);
        r.register("reoptimize", || Box::new(Reoptimize) as Box<dyn IgnoreBranch>);
        r
    })
}
