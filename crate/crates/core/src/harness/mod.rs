//! Experiment configuration, orchestration and output files.

pub mod config;
pub mod experiment;
pub mod output;

pub use config::{ExperimentConfig, GapSource, ModelSpec, Observable};
pub use experiment::{
    bound_curves, empirical_log_tail, resolve_parameters, run_dag_posterior, run_estimation, run_experiment,
    symmetric_grid, DagPosterior, EmpiricalTail, ResolvedParameters, TailSummary,
};
pub use output::emit_outputs;
