use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::records::{Features, N_FEATURES};

/// Standard deviations below this map their feature to 0.
pub const STD_GUARD: f64 = 1e-12;

/// Per-feature mean and population standard deviation, fitted on the
/// training split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalerState {
    pub means: Features,
    pub stds: Features,
    /// Number of training rows the state was fitted on.
    #[serde(skip)]
    pub fitted_rows: usize,
}

impl ScalerState {
    pub fn fit(train: &[Features]) -> Result<Self> {
        if train.len() < 2 {
            return Err(Error::Fit(format!(
                "scaler needs at least 2 training rows, got {}",
                train.len()
            )));
        }
        let n = train.len() as f64;
        let mut means = [0.0; N_FEATURES];
        let mut stds = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            let mean = train.iter().map(|r| r[k]).sum::<f64>() / n;
            let var = train.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / n;
            means[k] = mean;
            stds[k] = var.sqrt();
        }
        Ok(ScalerState {
            means,
            stds,
            fitted_rows: train.len(),
        })
    }

    pub fn transform_row(&self, row: &Features) -> Features {
        let mut out = [0.0; N_FEATURES];
        for k in 0..N_FEATURES {
            out[k] = if self.stds[k] < STD_GUARD {
                0.0
            } else {
                (row[k] - self.means[k]) / self.stds[k]
            };
        }
        out
    }

    pub fn transform(&self, rows: &[Features]) -> Vec<Features> {
        rows.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        crate::io_util::write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = crate::io_util::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| Error::Format {
            path: path.to_path_buf(),
            reason: e.to_string(),
        })
    }
}
