//! Training, few-shot fine-tuning, evaluation, sweeps and CSV reports.

mod eval;
mod fewshot;
mod report;
mod sweep;
mod train;

pub use eval::{
    acc30, compute_embeddings, error_histogram, evaluate, lower_median, render_plain, report_from_errors, ClassFilter,
    ClassHistogram, ClassMetrics, EmbeddingRow, EvalOptions, EvalReport, PosePredictor, SampleError, ACC30_THRESHOLD,
    SIGNED_BINS, UNSIGNED_BINS,
};
pub use fewshot::{finetune_fewshot, select_shots, FinetuneOutcome};
pub use report::{
    embeddings_csv, eval_report_csv, histogram_csv, sample_errors_csv, sweep_csv, train_log_csv, write_bytes, CsvMeta,
};
pub use sweep::{sweep, SweepParam, SweepRow};
pub use train::{composite_loss, train, train_with, EpochLog, LossParts, LossSettings, TrainConfig, TrainOptions, TrainOutcome};
