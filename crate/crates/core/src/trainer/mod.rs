//! Losses, the AdamW optimizer, the training loop and evaluation metrics.

mod loss;
mod metrics;
mod optim;
mod run;

pub use loss::{cross_entropy_loss, unified_loss, PROB_FLOOR};
pub use metrics::{confusion_matrix, metrics_from_confusion, ClassMetrics, MetricsReport};
pub use optim::{clip_grad_norm, AdamW, BETA1, BETA2, EPSILON};
pub use run::{
    check_model_gradients, evaluate, Detached, loss_on_tape, predict_corpus, train, train_with_objective, EpochRecord, LossTerms, Objective,
    TrainRun, TrainTargets,
};
