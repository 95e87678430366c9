//! Experiment orchestration for the lattice LFPP laboratory.

pub mod config;
pub mod experiments;
pub mod manifest;
pub mod plots;
pub mod runner;

pub use config::{Experiment, RunConfig};
pub use manifest::{emit_plots, RunManifest};
pub use runner::run_experiment;
