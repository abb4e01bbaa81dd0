//! Benchmark harness for `sfista-core`: configuration, reference solutions,
//! parameter sweeps and trace/image output.

pub mod bundle;
pub mod config;
pub mod error;
pub mod experiment;
pub mod reference;

pub use bundle::{build_problem, DeblurBundle};
pub use config::{load_config, ExperimentConfig, RunPoint};
pub use error::{CliError, CliResult};
pub use experiment::{emit_images, run_experiment, run_points, ConvergenceTrace, ExperimentReport, RunContext};
pub use reference::{compute_reference, Reference, ReferenceSettings};
