//! One disruption episode end to end (IBL steady state, blockage,
//! absorption, recover-or-ignore, FBL recovery, scoring) and sweeps of
//! episodes over blocklength and RIS size.

mod episode;
mod policy;
mod sweep;

pub use episode::{
    measure_absorption, prepare_baseline, respond, run_episode, run_steady_state, Baseline,
    EpisodeOptions, EpisodeResult, EpisodeStatus, LabeledTrace, Stage, SteadyState,
};
pub use policy::{
    decide_recovery, ignore_branch_registry, policy_registry, AlwaysIgnore, AlwaysRecover,
    DecisionOutcome, Decide, EpisodeContext, IgnoreBranch, IgnoreOutcome, RecoveryPolicy,
    Reoptimize, Stale,
};
pub use sweep::{quantile, sweep, sweep_episodes, Quartiles, SweepGrid, SweepRow, SweepSummary, SweepTable, CSV_HEADER};

use serde::{Deserialize, Serialize};

use crate::metrics::MetricsError;
use crate::model::ModelError;
use crate::registry::UnknownStrategy;
use crate::sca::ScaError;

pub const DEFAULT_POLICY: &str = "decide";
pub const DEFAULT_IGNORE_BRANCH: &str = "stale";
pub const DEFAULT_PROBE_STEPS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Sca(#[from] ScaError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Strategy(#[from] UnknownStrategy),
    #[error("sweep grid `{0}` is empty")]
    EmptyGrid(&'static str),
    #[error("worker pool: {0}")]
    Workers(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Decision {
    Recover,
    Ignore,
}

impl Decision {
    pub fn as_str(self) -> &'static str {
        match self {
            Decision::Recover => "recover",
            Decision::Ignore => "ignore",
        }
    }
}
