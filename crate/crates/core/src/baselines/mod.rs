//! Classical tabular classifiers for the unimodal comparison.

mod gnb;
mod knn;
mod logreg;

pub use gnb::{gnb_fit, gnb_predict, GaussianNbModel, VARIANCE_FLOOR};
pub use knn::{knn_fit, knn_predict, KnnModel, DEFAULT_K};
pub use logreg::{logreg_fit, logreg_loss_and_grad, logreg_predict, LogRegConfig, LogRegModel};

use serde::{Deserialize, Serialize};

use crate::train::EvalReport;

pub const LEADERBOARD_HEADER: &str = "model,accuracy,precision_w,recall_w,f1_w";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeaderboardRow {
    pub model: String,
    pub accuracy: f64,
    pub precision_w: f64,
    pub recall_w: f64,
    pub f1_w: f64,
}

impl LeaderboardRow {
    pub fn from_report(model: &str, r: &EvalReport) -> Self {
        LeaderboardRow {
            model: model.to_string(),
            accuracy: r.accuracy,
            precision_w: r.weighted_precision,
            recall_w: r.weighted_recall,
            f1_w: r.weighted_f1,
        }
    }
}

/// Rows sorted by descending accuracy (stable for equal scores).
pub fn leaderboard_csv(rows: &[LeaderboardRow]) -> String {
    let mut sorted = rows.to_vec();
    sorted.sort_by(|a, b| b.accuracy.total_cmp(&a.accuracy));
    let mut out = format!("{LEADERBOARD_HEADER}\n");
    for r in sorted {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.model, r.accuracy, r.precision_w, r.recall_w, r.f1_w
        ));
    }
    out
}
