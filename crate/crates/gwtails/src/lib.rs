//! Experiment runner for `gwtails-core`: JSON and flag configuration, a
//! rayon executor, CSV tables and run manifests.

pub mod cli;
pub mod config;
pub mod output;
pub mod parallel;
pub mod run;

pub use config::ExperimentConfig;
pub use parallel::Parallel;
