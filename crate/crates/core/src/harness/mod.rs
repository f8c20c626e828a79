//! Seeded experiments, independent verification oracles and reports.

pub mod config;
pub mod instance;
pub mod oracle;
pub mod report;
pub mod rng;
pub mod run;

pub use config::{ExperimentConfig, InstanceSpec, Mode, Tolerances};
pub use report::{ExperimentReport, TrialRecord};
pub use run::run;
