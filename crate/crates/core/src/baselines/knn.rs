use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_K: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnnModel {
    pub rows: Vec<Vec<f64>>,
    pub labels: Vec<usize>,
    pub k: usize,
}

pub fn knn_fit<R: AsRef<[f64]>>(rows: &[R], labels: &[usize], k: usize) -> Result<KnnModel> {
    if rows.len() != labels.len() {
        return Err(Error::Dimension(format!("{} rows against {} labels", rows.len(), labels.len())));
    }
    if k == 0 || k > rows.len() {
        return Err(Error::Config(format!("k = {k} with {} training rows", rows.len())));
    }
    Ok(KnnModel {
        rows: rows.iter().map(|r| r.as_ref().to_vec()).collect(),
        labels: labels.to_vec(),
        k,
    })
}

fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

impl KnnModel {
    /// Indices of the `k` nearest training rows; equal distances keep the
    /// lower training index first.
    pub fn neighbours(&self, query: &[f64]) -> Result<Vec<usize>> {
        if self.k > self.rows.len() {
            return Err(Error::Config(format!("k = {} with {} training rows", self.k, self.rows.len())));
        }
        if self.rows.first().is_some_and(|r| r.len() != query.len()) {
            return Err(Error::Dimension(format!("query of {} values", query.len())));
        }
        let mut scored: Vec<(f64, usize)> = self
            .rows
            .iter()
            .enumerate()
            .map(|(i, r)| (squared_distance(r, query), i))
            .collect();
        scored.select_nth_unstable_by(self.k - 1, |a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut nearest: Vec<(f64, usize)> = scored[..self.k].to_vec();
        nearest.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        Ok(nearest.into_iter().map(|(_, i)| i).collect())
    }

    /// Majority label of the neighbours; a tied vote goes to the lowest label.
    pub fn predict_one(&self, query: &[f64]) -> Result<usize> {
        let classes = self.labels.iter().max().map_or(0, |m| m + 1);
        let mut votes = vec![0usize; classes];
        for i in self.neighbours(query)? {
            votes[self.labels[i]] += 1;
        }
        let mut best = 0;
        for (c, &v) in votes.iter().enumerate() {
            if v > votes[best] {
                best = c;
            }
        }
        Ok(best)
    }
}

pub fn knn_predict<R: AsRef<[f64]>>(model: &KnnModel, rows: &[R]) -> Result<Vec<usize>> {
    rows.iter().map(|r| model.predict_one(r.as_ref())).collect()
}
