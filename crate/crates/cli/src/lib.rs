//! Fixtures, field generators and the acceptance suite for `hsdecomp-core`.

pub mod config;
pub mod fields;
pub mod plotdata;
pub mod report;
pub mod suite;

pub use config::{CheckId, ExperimentConfig};
pub use suite::{run_check, run_suite, SuiteReport};
