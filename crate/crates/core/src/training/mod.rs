//! Loss, optimizer, training loop and evaluation metrics.

pub mod auc;
pub mod loss;
pub mod metrics;
pub mod optim;
pub mod trainer;

pub use auc::{auc, roc_curve, trapezoid_area};
pub use loss::{balanced_bce, unweighted_bce, ClassStats, LossKind};
pub use metrics::{BinaryMetrics, Metrics};
pub use optim::{optimizer_step, OptimizerKind, OptimizerState};
pub use trainer::{
    evaluate, predict_samples, sample_vocab, train, train_from, EpochRecord, History, Selection, TrainConfig,
    TrainOutcome,
};
