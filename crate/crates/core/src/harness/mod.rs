//! Active-learning loop, dataset splits, repetition protocol and result
//! persistence.

pub mod config;
pub mod run;
pub mod splits;
pub mod suite;

pub use config::{ExperimentConfig, ModelSelection, RunSeeds};
pub use run::{
    run_active_learning, run_with_checkpoint, run_with_oracle, GroundTruth, Oracle, RunResult, TraceEntry, Workspace,
};
pub use splits::{make_splits, Splits};
pub use suite::{mean_std, run_suite, summarize, SuiteMode, SuiteReport, SummaryRow, DEFAULT_SWEEP};
