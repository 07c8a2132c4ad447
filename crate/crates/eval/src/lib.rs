//! Evaluation of latent rewriting: propagation, ranking metrics, distance
//! diagnostics, projections and plots.

pub mod harness;
pub mod pca;
pub mod plot;
pub mod propagate;
pub mod report;
pub mod roc;

pub use harness::{usage_frequencies, DepthResult, EvalConfig, Evaluator, L2Row, Method, ProjRow};
pub use propagate::{propagate_step, score_with_embedding, PropagationState};
pub use roc::{roc_auc, RocCurve};

use lrwt_core::dataset::DatasetError;
use lrwt_models::ModelError;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("ROC needs both classes, got {n_pos} positive and {n_neg} negative scores")]
    EmptyRocSide { n_pos: usize, n_neg: usize },
    #[error("score is not finite")]
    NonFiniteScore,
    #[error("unknown method `{0}`")]
    UnknownMethod(String),
    #[error("method `{0}` needs trained models")]
    ModelsRequired(&'static str),
    #[error("parameter pool is empty")]
    EmptyPool,
    #[error("chain layer {0} has no statements")]
    EmptyLayer(usize),
    #[error("propagation state has no vector")]
    EmptyState,
    #[error("projection needs at least 3 vectors of equal length, got {count}")]
    TooFewVectors { count: usize },
    #[error("malformed {file}: {message}")]
    Malformed { file: String, message: String },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, EvalError>;
