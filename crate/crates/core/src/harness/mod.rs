//! Experiment orchestration: pair distributions, configs, trials, sweeps,
//! demonstrations and output formats.

pub mod config;
pub mod demo;
pub mod distribution;
pub mod record;
pub mod report;
pub mod sweep;
pub mod trial;

pub use config::{Experiment, ExperimentConfig, Mode, SweepGrid};
pub use distribution::{PairDistribution, PairSampler};
pub use record::{TrialDetail, TrialRecord};
pub use sweep::{run_sweep, SweepResult};
pub use trial::{run_experiment, run_trial, GridPoint};
