//! Within-session stratified cross-validation of covariance pipelines.
//!
//! Folds are a pure function of `(labels, k, seed)`, so every pipeline sees
//! the same splits. Fold cells run in parallel and are merged in
//! `(dataset, subject, session, fold)` order, so output never depends on the
//! number of worker threads.

mod folds;
mod metrics;
mod pipeline;
mod table;

pub use folds::{fold_rng, stratified_kfold};
pub use metrics::auc_roc;
pub use pipeline::{
    run_pipeline, Dataset, EvalConfig, FilterKind, FitObserver, FoldContext, PipelineSpec, Session,
};
pub use table::{comparable_cells, PipelineScoreTable, ScoreRow, TABLE_SCHEMA_VERSION};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error(transparent)]
    Core(#[from] meanfield::Error),
    #[error(transparent)]
    Stats(#[from] meanfield_stats::StatsError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
