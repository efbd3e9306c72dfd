//! Splits, metrics, multi-seed experiments and report tables.

mod experiment;
mod metrics;
mod split;

pub use experiment::{
    ablation_sweep, edition_label, results_markdown, run_experiment, stats_markdown,
    write_results_csv, EvalReport, ExperimentSpec, SeedResult, REPORT_SCHEMA_VERSION,
};
pub use metrics::{accuracy, weighted_f1, MeanStd};
pub use split::{make_split, Split, SplitSpec};
