use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::argmax;
use crate::neural::{Network, Optimizer, OptimizerConfig, Tensor};
use crate::preprocess::compute_class_weights;

/// Samples for a model: one tensor per branch (`[N, ...input_shape]`, in
/// branch order) and one label per row.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<Tensor>,
    labels: Vec<usize>,
}

impl Dataset {
    pub fn new(inputs: Vec<Tensor>, labels: Vec<usize>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::Dimension("dataset needs at least one input tensor".into()));
        }
        for t in &inputs {
            if t.rank() == 0 || t.shape()[0] != labels.len() {
                return Err(Error::Dimension(format!(
                    "input of shape {:?} against {} labels",
                    t.shape(),
                    labels.len()
                )));
            }
        }
        Ok(Dataset { inputs, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn inputs(&self) -> &[Tensor] {
        &self.inputs
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn subset(&self, rows: &[usize]) -> Result<Dataset> {
        let labels = rows
            .iter()
            .map(|&i| {
                self.labels
                    .get(i)
                    .copied()
                    .ok_or_else(|| Error::Index(format!("row {i} of {}", self.labels.len())))
            })
            .collect::<Result<Vec<_>>>()?;
        let inputs = self.inputs.iter().map(|t| t.select_rows(rows)).collect();
        Ok(Dataset { inputs, labels })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub optimizer: OptimizerConfig,
    pub seed: u64,
    pub class_weighting: bool,
    pub train_fraction: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            optimizer: OptimizerConfig::default(),
            seed: 42,
            class_weighting: true,
            train_fraction: 0.7,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Config("batch_size must be at least 1".into()));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train_fraction {} outside (0, 1)",
                self.train_fraction
            )));
        }
        self.optimizer.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub val_loss: f64,
    pub val_accuracy: f64,
}

/// Loss (with the given class weights) and accuracy of `model` on `data`,
/// evaluated in batches. An empty set scores 0 for both.
pub fn evaluate_loss(model: &Network, data: &Dataset, class_weights: &[f64], batch_size: usize) -> Result<(f64, f64, Vec<usize>)> {
    let n = data.len();
    if n == 0 {
        return Ok((0.0, 0.0, Vec::new()));
    }
    let mut weighted_loss = 0.0;
    let mut predictions = Vec::with_capacity(n);
    let rows: Vec<usize> = (0..n).collect();
    for chunk in rows.chunks(batch_size.max(1)) {
        let batch = data.subset(chunk)?;
        let probs = model.predict(batch.inputs())?;
        let loss = crate::neural::weighted_cross_entropy(&probs, batch.labels(), class_weights)?;
        weighted_loss += loss * chunk.len() as f64;
        predictions.extend((0..probs.rows()).map(|i| argmax(probs.row(i))));
    }
    let correct = predictions
        .iter()
        .zip(data.labels())
        .filter(|(p, t)| p == t)
        .count();
    Ok((weighted_loss / n as f64, correct as f64 / n as f64, predictions))
}

/// Class weights for the training labels, or ones when weighting is off.
pub fn loss_weights(labels: &[usize], classes: usize, weighting: bool) -> Result<Vec<f64>> {
    if !weighting {
        return Ok(vec![1.0; classes]);
    }
    let mut counts = vec![0usize; classes];
    for &l in labels {
        *counts
            .get_mut(l)
            .ok_or_else(|| Error::Index(format!("label {l} with {classes} classes")))? += 1;
    }
    Ok(compute_class_weights(&counts)?.0)
}

/// Minibatch training with a fresh seeded shuffle every epoch. Validation
/// loss is the plain (unweighted) cross-entropy.
pub fn train(mut model: Network, train_set: &Dataset, val_set: &Dataset, cfg: &TrainConfig) -> Result<(Network, Vec<EpochRecord>)> {
    cfg.validate()?;
    if cfg.epochs == 0 {
        return Ok((model, Vec::new()));
    }
    if train_set.is_empty() {
        return Err(Error::Data("training split is empty".into()));
    }
    let classes = *model
        .spec()
        .validate()?
        .last()
        .ok_or_else(|| Error::Config("model output has no class axis".into()))?;
    let weights = loss_weights(train_set.labels(), classes, cfg.class_weighting)?;
    let plain = vec![1.0; classes];

    let mut optimizer = Optimizer::new(cfg.optimizer, model.params())?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut history = Vec::with_capacity(cfg.epochs);

    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut correct = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            let batch = train_set.subset(chunk)?;
            let (loss, probs, grads) = model.loss_and_gradients(batch.inputs(), batch.labels(), &weights)?;
            if !loss.is_finite() {
                return Err(Error::Numeric(format!("non-finite training loss at epoch {epoch}")));
            }
            let spec = model.spec().clone();
            optimizer.step(&spec, model.params_mut(), &grads)?;
            loss_sum += loss * chunk.len() as f64;
            correct += (0..probs.rows())
                .filter(|&i| argmax(probs.row(i)) == batch.labels()[i])
                .count();
        }
        let (val_loss, val_accuracy, _) = evaluate_loss(&model, val_set, &plain, cfg.batch_size)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_accuracy: correct as f64 / train_set.len() as f64,
            val_loss,
            val_accuracy,
        });
    }
    Ok((model, history))
}
