use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-class loss multipliers ordered by label code.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights(pub Vec<f64>);

impl ClassWeights {
    pub fn uniform(classes: usize) -> Self {
        ClassWeights(vec![1.0; classes])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }
}

/// Balanced inverse frequency: `w_c = N / (K · n_c)`.
pub fn compute_class_weights(counts: &[usize]) -> Result<ClassWeights> {
    if counts.is_empty() {
        return Err(Error::Config("no classes to weight".into()));
    }
    if let Some(c) = counts.iter().position(|&n| n == 0) {
        return Err(Error::Config(format!("class {c} is absent from the training split")));
    }
    let total: usize = counts.iter().sum();
    let k = counts.len() as f64;
    Ok(ClassWeights(
        counts
            .iter()
            .map(|&n| total as f64 / (k * n as f64))
            .collect(),
    ))
}
