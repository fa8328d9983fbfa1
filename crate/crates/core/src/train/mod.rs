//! Training loop, evaluation metrics and training curves.

mod curves;
mod metrics;
mod trainer;

pub use curves::{curves_csv, emit_curves, parse_curves, train_test_gap, GapSummary, CURVE_HEADER};
pub use metrics::{confusion_matrix, evaluate_labels, harmonic_mean, scores, EvalReport};
pub use trainer::{evaluate_loss, loss_weights, train, Dataset, EpochRecord, TrainConfig};
