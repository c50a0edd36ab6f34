//! Experiment harness behind the `chainfair` command-line tool.

pub mod config;
pub mod error;
pub mod experiment;
pub mod harness;
pub mod kwik_bound;

pub use config::{Algorithm, Axis, ExperimentConfig, InstanceConfig};
pub use error::{CliError, Result};
pub use experiment::{
    audit_files, run_experiment, sweep, AuditFile, ExperimentSummary, SweepRow, TrialSummary,
};
pub use harness::{final_window, run_fair_to_kwik_trial, run_trial, FairToKwikTrial, TrialResult};
pub use kwik_bound::{run_kwik_bound, KwikBoundReport, KwikBoundRequest, LearnerKind};
