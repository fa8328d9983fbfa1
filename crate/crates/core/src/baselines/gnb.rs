use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::argmax;

pub const VARIANCE_FLOOR: f64 = 1e-9;

/// Gaussian naive Bayes with per-class, per-feature population variances.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianNbModel {
    /// `[class][feature]`.
    pub means: Vec<Vec<f64>>,
    pub variances: Vec<Vec<f64>>,
    pub priors: Vec<f64>,
}

pub fn gnb_fit<R: AsRef<[f64]>>(rows: &[R], labels: &[usize], classes: usize) -> Result<GaussianNbModel> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension(format!("{} rows against {} labels", rows.len(), labels.len())));
    }
    let d = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
    let mut members: Vec<Vec<&[f64]>> = vec![Vec::new(); classes];
    for (row, &y) in rows.iter().zip(labels) {
        let row = row.as_ref();
        if row.len() != d {
            return Err(Error::Dimension("ragged feature rows".into()));
        }
        members
            .get_mut(y)
            .ok_or_else(|| Error::Index(format!("label {y} with {classes} classes")))?
            .push(row);
    }
    let mut means = Vec::with_capacity(classes);
    let mut variances = Vec::with_capacity(classes);
    for (c, m) in members.iter().enumerate() {
        if m.len() < 2 {
            return Err(Error::Fit(format!("class {c} has {} rows, need at least 2", m.len())));
        }
        let n = m.len() as f64;
        let mean: Vec<f64> = (0..d).map(|j| m.iter().map(|r| r[j]).sum::<f64>() / n).collect();
        let var: Vec<f64> = (0..d)
            .map(|j| {
                let v = m.iter().map(|r| (r[j] - mean[j]).powi(2)).sum::<f64>() / n;
                v.max(VARIANCE_FLOOR)
            })
            .collect();
        means.push(mean);
        variances.push(var);
    }
    let total = rows.len() as f64;
    let priors = members.iter().map(|m| m.len() as f64 / total).collect();
    Ok(GaussianNbModel {
        means,
        variances,
        priors,
    })
}

impl GaussianNbModel {
    /// `ln P(c) + Σ_j ln N(x_j; μ_cj, σ²_cj)` for every class.
    pub fn log_joint(&self, row: &[f64]) -> Result<Vec<f64>> {
        let d = self.means.first().map_or(0, Vec::len);
        if row.len() != d {
            return Err(Error::Dimension(format!("row of {} values for {d} features", row.len())));
        }
        Ok(self
            .priors
            .iter()
            .enumerate()
            .map(|(c, &prior)| {
                let mut s = prior.ln();
                for (j, &x) in row.iter().enumerate() {
                    let var = self.variances[c][j];
                    let diff = x - self.means[c][j];
                    s -= 0.5 * (2.0 * std::f64::consts::PI * var).ln() + diff * diff / (2.0 * var);
                }
                s
            })
            .collect())
    }
}

pub fn gnb_predict<R: AsRef<[f64]>>(model: &GaussianNbModel, rows: &[R]) -> Result<Vec<usize>> {
    rows.iter()
        .map(|r| Ok(argmax(&model.log_joint(r.as_ref())?)))
        .collect()
}
