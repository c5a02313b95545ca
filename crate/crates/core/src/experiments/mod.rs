//! Experiment configuration, the multi-seed runner, the evaluation report
//! and figure output.

mod config;
mod figures;
mod report;
mod run;

pub use config::{Comparison, Experiment, ExperimentConfig};
pub use figures::{emit_figures, histogram, overlay, HISTOGRAM_BINS};
pub use report::{
    evaluate_records, evaluation_units, fuse_records, sorted_scores, unit_metrics, ComparisonReport, EvalReport,
    SampleCounts, ScoreTypeReport, UnitMetrics,
};
pub use run::{prepare_data, run_experiment, score_seed, train_or_load, ExperimentData, SeedRun};
