//! Experiment configuration, coupled runs, sweeps and data output.

pub mod config;
pub mod output;
pub mod run;
pub mod sweep;

pub use config::{CvSetting, ExperimentConfig, InitialSpec, OrbitalSpec, SweepAxis, SweepSpec};
pub use run::{run, FitSummary, ReportRow, RunReport};
pub use sweep::{sweep, SweepResult, SweepSummary};
