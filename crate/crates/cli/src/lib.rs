//! Experiment runner for the `rmhmc` integrators: TOML-configured grids
//! written out as CSV reports, and the acceptance battery behind
//! `rmhmc verify`.

pub mod config;
pub mod experiment;
pub mod report;
pub mod verify;

pub use config::{ExperimentSpec, ModelSpec};
pub use experiment::{run_experiment, ExperimentResults};
pub use report::write_reports;
