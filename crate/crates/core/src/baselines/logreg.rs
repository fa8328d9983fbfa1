use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::argmax;
use crate::neural::ops::LOG_CLAMP;

/// Multinomial logistic regression `softmax(xW + b)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    pub features: usize,
    pub classes: usize,
    /// Row-major `[features, classes]`.
    pub weight: Vec<f64>,
    pub bias: Vec<f64>,
    pub class_weights: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LogRegConfig {
    pub lr: f64,
    pub epochs: usize,
    /// 0 means full-batch gradient descent.
    pub batch_size: usize,
    pub seed: u64,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            lr: 0.5,
            epochs: 300,
            batch_size: 0,
            seed: 42,
        }
    }
}

impl LogRegModel {
    pub fn zeros(features: usize, class_weights: Vec<f64>) -> Result<Self> {
        let classes = class_weights.len();
        if classes < 2 || features == 0 {
            return Err(Error::Config(format!(
                "logistic regression needs ≥2 classes and ≥1 feature, got {classes} and {features}"
            )));
        }
        Ok(LogRegModel {
            features,
            classes,
            weight: vec![0.0; features * classes],
            bias: vec![0.0; classes],
            class_weights,
        })
    }

    pub fn probabilities(&self, row: &[f64]) -> Result<Vec<f64>> {
        if row.len() != self.features {
            return Err(Error::Dimension(format!(
                "row of {} values for a {}-feature model",
                row.len(),
                self.features
            )));
        }
        let mut z = self.bias.clone();
        for (i, &x) in row.iter().enumerate() {
            for (c, zc) in z.iter_mut().enumerate() {
                *zc += x * self.weight[i * self.classes + c];
            }
        }
        let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let e: Vec<f64> = z.iter().map(|v| (v - m).exp()).collect();
        let s: f64 = e.iter().sum();
        Ok(e.into_iter().map(|v| v / s).collect())
    }
}

/// Batch-mean weighted cross-entropy and its gradient with respect to
/// `(weight, bias)`.
pub fn logreg_loss_and_grad<R: AsRef<[f64]>>(model: &LogRegModel, rows: &[R], labels: &[usize]) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    if rows.len() != labels.len() || rows.is_empty() {
        return Err(Error::Dimension(format!("{} rows against {} labels", rows.len(), labels.len())));
    }
    let k = model.classes;
    let n = rows.len() as f64;
    let mut loss = 0.0;
    let mut gw = vec![0.0; model.weight.len()];
    let mut gb = vec![0.0; k];
    for (row, &y) in rows.iter().zip(labels) {
        let row = row.as_ref();
        if y >= k {
            return Err(Error::Index(format!("label {y} with {k} classes")));
        }
        let p = model.probabilities(row)?;
        let w = model.class_weights[y];
        loss -= w * p[y].max(LOG_CLAMP).ln();
        for c in 0..k {
            let dz = w * (p[c] - if c == y { 1.0 } else { 0.0 }) / n;
            gb[c] += dz;
            for (i, &x) in row.iter().enumerate() {
                gw[i * k + c] += x * dz;
            }
        }
    }
    Ok((loss / n, gw, gb))
}

/// Gradient descent from zero parameters. Minibatches (when enabled) are
/// drawn from a seeded shuffle per epoch.
pub fn logreg_fit<R: AsRef<[f64]>>(rows: &[R], labels: &[usize], class_weights: &[f64], cfg: &LogRegConfig) -> Result<LogRegModel> {
    let features = rows
        .first()
        .map(|r| r.as_ref().len())
        .ok_or_else(|| Error::Fit("no training rows".into()))?;
    if !(cfg.lr > 0.0 && cfg.lr.is_finite()) {
        return Err(Error::Config(format!("learning rate {}", cfg.lr)));
    }
    let mut model = LogRegModel::zeros(features, class_weights.to_vec())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..rows.len()).collect();
    let batch = if cfg.batch_size == 0 { rows.len() } else { cfg.batch_size };
    for _ in 0..cfg.epochs {
        if batch < rows.len() {
            order.shuffle(&mut rng);
        }
        for chunk in order.chunks(batch) {
            let xs: Vec<&[f64]> = chunk.iter().map(|&i| rows[i].as_ref()).collect();
            let ys: Vec<usize> = chunk.iter().map(|&i| labels[i]).collect();
            let (_, gw, gb) = logreg_loss_and_grad(&model, &xs, &ys)?;
            for (w, g) in model.weight.iter_mut().zip(&gw) {
                *w -= cfg.lr * g;
            }
            for (b, g) in model.bias.iter_mut().zip(&gb) {
                *b -= cfg.lr * g;
            }
        }
    }
    if model.weight.iter().chain(&model.bias).any(|v| !v.is_finite()) {
        return Err(Error::Numeric("logistic regression diverged".into()));
    }
    Ok(model)
}

pub fn logreg_predict<R: AsRef<[f64]>>(model: &LogRegModel, rows: &[R]) -> Result<(Vec<usize>, Vec<Vec<f64>>)> {
    let probs = rows
        .iter()
        .map(|r| model.probabilities(r.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    let labels = probs.iter().map(|p| argmax(p)).collect();
    Ok((labels, probs))
}
