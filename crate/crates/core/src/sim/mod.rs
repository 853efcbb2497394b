//! Discrete-event harness, experiment drivers and their configuration.

pub mod config;
pub mod engine;
pub mod experiments;
pub mod output;
pub mod scheduler;

pub use config::{ExperimentConfig, ExperimentKind};
pub use engine::{run_simulation, NetworkSpec, SimOutput};
pub use experiments::{run_experiment, Report};
pub use output::Table;
