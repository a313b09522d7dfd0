//! Evaluation protocol: one stratified hold-out split shared by every
//! classifier, k-fold grid search on the training rows, and per-classifier
//! metrics on the untouched test rows.

pub mod benchmark;
pub mod classifier;
pub mod config;
pub mod evaluate;
pub mod grid;
pub mod metrics;
pub mod report;
pub mod split;
pub mod windows;

use std::path::PathBuf;

pub use classifier::{Classifier, ModelSpec, Mtry};
pub use config::{EvalConfig, NnSettings};
pub use evaluate::{evaluate_all, Evaluation};
pub use grid::{grid_search, CvRow, GridResult};
pub use metrics::{compute_metrics, ConfusionMatrix, Metrics};
pub use report::{EvalReport, ReportRow};
pub use split::{stratified_folds, stratified_split, subject_split, Split, SplitMode};

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("stratum (label {label}, activity {activity:?}) has {size} row(s); need at least 2")]
    StratumTooSmall {
        label: usize,
        activity: String,
        size: usize,
    },
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("every grid point failed: {0}")]
    NoViablePoint(String),
    #[error("config line {line}: {message}")]
    Config { line: usize, message: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Ml(#[from] ecgstress_ml::MlError),
    #[error(transparent)]
    Nn(#[from] ecgstress_nn::NnError),
}

pub type Result<T> = std::result::Result<T, EvalError>;
