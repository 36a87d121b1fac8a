//! Experiment configuration, orchestration and reporting.

mod config;
mod report;
mod run;

pub use config::{
    DataMode, ExperimentConfig, ExperimentKind, LearnerKind, LearnerSpec, ModelSource, NoiseConfig, NoiseKind,
    PartialConfig, SamplerConfig, StateConfig, Targets, SCHEMA_VERSION,
};
pub use report::{aggregate, ExperimentReport, Provenance, ResolvedSettings, SizeAggregate, TrialRow, CSV_COLUMNS};
pub use run::{
    max_conditional_error, run_experiment, run_partial_learning_experiment, run_state_learning_experiment,
    run_structure_experiment, trial_seed,
};
