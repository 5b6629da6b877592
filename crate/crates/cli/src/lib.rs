//! Configuration loading, experiment commands and chart output for the
//! `ris-fbl` binary.

pub mod commands;
pub mod spec;
pub mod svg;

pub use commands::{cmd_run, cmd_sweep, cmd_validate, episode_jsonl, summary_csv, RunOutput, SweepOutput};
pub use spec::{load_spec, parse_spec, Axis, ExperimentSpec, RawSpec, SpecError};
