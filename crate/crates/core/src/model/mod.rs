//! Scenario geometry, random channel generation and SINR evaluation.

mod channels;
mod config;
mod state;
mod topology;

pub use channels::{
    apply_blockage, effective_channel, generate_channels, ris_correlation, sqrt_psd, ChannelSet,
};
pub use config::{db_to_linear, dbm_to_watts, watts_to_dbm, Heights, PathLossModel, SystemConfig};
pub use state::{per_ap_power, sinr, sinr_all, NetworkState, Regime};
pub use topology::{generate_topology, Point, Topology};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration field `{field}`: {reason}")]
    Config { field: &'static str, reason: String },
    #[error("quadrant placement supports at most 4 APs, got {0}")]
    TooManyAps(usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("every direct link is already blocked")]
    AllLinksBlocked,
}

impl ModelError {
    pub(crate) fn config(field: &'static str, reason: impl Into<String>) -> Self {
        ModelError::Config {
            field,
            reason: reason.into(),
        }
    }
}
