//! Confusion matrix and the accuracy / precision / recall / F1 family.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// `matrix[t][p]` counts samples of true class `t` predicted as `p`.
pub fn confusion_matrix(truth: &[usize], predicted: &[usize], classes: usize) -> Result<Vec<Vec<u64>>> {
    if truth.len() != predicted.len() {
        return Err(Error::Dimension(format!(
            "{} true labels against {} predictions",
            truth.len(),
            predicted.len()
        )));
    }
    let mut m = vec![vec![0u64; classes]; classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        if t >= classes || p >= classes {
            return Err(Error::Index(format!("label pair ({t}, {p}) with {classes} classes")));
        }
        m[t][p] += 1;
    }
    Ok(m)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    /// Rows are true classes, columns predicted classes.
    pub confusion_matrix: Vec<Vec<u64>>,
    pub accuracy: f64,
    pub per_class_precision: Vec<f64>,
    pub per_class_recall: Vec<f64>,
    pub per_class_f1: Vec<f64>,
    /// True-class counts (row sums).
    pub support: Vec<u64>,
    pub weighted_precision: f64,
    pub weighted_recall: f64,
    pub weighted_f1: f64,
    pub macro_f1: f64,
    /// Set when the matrix is empty; every score is then 0.
    pub degenerate: bool,
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

pub fn harmonic_mean(p: f64, r: f64) -> f64 {
    if p + r == 0.0 {
        0.0
    } else {
        2.0 * p * r / (p + r)
    }
}

/// Scores from a square count matrix. Undefined precision or recall (zero
/// denominator) is reported as 0.
pub fn scores(matrix: &[Vec<u64>]) -> Result<EvalReport> {
    let k = matrix.len();
    if matrix.iter().any(|row| row.len() != k) {
        return Err(Error::Dimension("confusion matrix is not square".into()));
    }
    let support: Vec<u64> = matrix.iter().map(|row| row.iter().sum()).collect();
    let predicted: Vec<u64> = (0..k).map(|j| matrix.iter().map(|row| row[j]).sum()).collect();
    let total: u64 = support.iter().sum();
    let tp: Vec<u64> = (0..k).map(|i| matrix[i][i]).collect();
    let trace: u64 = tp.iter().sum();

    let precision: Vec<f64> = (0..k).map(|c| ratio(tp[c], predicted[c])).collect();
    let recall: Vec<f64> = (0..k).map(|c| ratio(tp[c], support[c])).collect();
    let f1: Vec<f64> = precision
        .iter()
        .zip(&recall)
        .map(|(&p, &r)| harmonic_mean(p, r))
        .collect();

    let weighted = |values: &[f64]| -> f64 {
        if total == 0 {
            return 0.0;
        }
        values
            .iter()
            .zip(&support)
            .map(|(v, &n)| v * n as f64)
            .sum::<f64>()
            / total as f64
    };
    let macro_f1 = if k == 0 {
        0.0
    } else {
        f1.iter().sum::<f64>() / k as f64
    };

    Ok(EvalReport {
        confusion_matrix: matrix.to_vec(),
        accuracy: ratio(trace, total),
        weighted_precision: weighted(&precision),
        // Σ_c (n_c/N)·(TP_c/n_c) is trace/N; computing it that way keeps the
        // identity with accuracy exact.
        weighted_recall: ratio(trace, total),
        weighted_f1: weighted(&f1),
        macro_f1,
        per_class_precision: precision,
        per_class_recall: recall,
        per_class_f1: f1,
        support,
        degenerate: total == 0,
    })
}

pub fn evaluate_labels(truth: &[usize], predicted: &[usize], classes: usize) -> Result<EvalReport> {
    scores(&confusion_matrix(truth, predicted, classes)?)
}
