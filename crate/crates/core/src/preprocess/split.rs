use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Row indices of a train/validation partition, each list ascending.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub validation: Vec<usize>,
}

/// Per-class training quotas: `floor(f·n_c)` each, then single rows handed
/// to the classes with the largest fractional remainders (lowest code first
/// on ties) until the total reaches `round(f·N)`.
pub fn stratified_quotas(counts: &[usize], train_fraction: f64) -> Result<Vec<usize>> {
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return Err(Error::Split(format!("train fraction {train_fraction} outside (0, 1)")));
    }
    if let Some(c) = counts.iter().position(|&n| n < 2) {
        return Err(Error::Split(format!(
            "class {c} has {} rows, need at least 2",
            counts[c]
        )));
    }
    // The epsilon absorbs representation error such as 0.7·440 = 307.99…
    const EPS: f64 = 1e-9;
    let exact: Vec<f64> = counts.iter().map(|&n| train_fraction * n as f64).collect();
    let mut quotas: Vec<usize> = exact.iter().map(|&x| (x + EPS).floor() as usize).collect();
    let total: usize = counts.iter().sum();
    let target = (train_fraction * total as f64).round() as usize;

    let mut order: Vec<usize> = (0..counts.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - quotas[a] as f64;
        let fb = exact[b] - quotas[b] as f64;
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut assigned: usize = quotas.iter().sum();
    for &c in order.iter().cycle().take(counts.len() * 2) {
        if assigned >= target {
            break;
        }
        if quotas[c] < counts[c] {
            quotas[c] += 1;
            assigned += 1;
        }
    }
    Ok(quotas)
}

/// Seeded stratified split of rows labelled `0..n_classes`.
pub fn stratified_split(labels: &[usize], n_classes: usize, train_fraction: f64, seed: u64) -> Result<Split> {
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); n_classes];
    for (i, &l) in labels.iter().enumerate() {
        by_class
            .get_mut(l)
            .ok_or_else(|| Error::Index(format!("label {l} with {n_classes} classes")))?
            .push(i);
    }
    let counts: Vec<usize> = by_class.iter().map(Vec::len).collect();
    let quotas = stratified_quotas(&counts, train_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for (mut rows, quota) in by_class.into_iter().zip(quotas) {
        rows.shuffle(&mut rng);
        train.extend_from_slice(&rows[..quota]);
        validation.extend_from_slice(&rows[quota..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok(Split { train, validation })
}
