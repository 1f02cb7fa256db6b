//! Experiment orchestration: configs, folds, the synthetic generator, the
//! per-fold pipeline and report rendering.

mod config;
mod folds;
mod pipeline;
mod report;
mod synth;

pub use config::{DataPaths, ExperimentConfig, Removal, Selection, SyntheticConfig};
pub use folds::{kfold_splits, Split};
pub use pipeline::{
    build_debiaser, probe_accuracy, rank_features, run_fold, run_on_data, run_pipeline, ClassProbe, Debiaser,
    ExperimentData,
    RemovalInputs,
};
pub use report::{
    confidence_interval, method_label, render_markdown, render_text, FoldMetrics, MetricReport, MetricSummary, Z95,
};
pub use synth::{files, generate_synthetic, write_synthetic, SyntheticData};
