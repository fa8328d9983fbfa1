use serde::{Deserialize, Serialize};

use super::records::{Class, RawRecord, N_CLASSES, N_FEATURES};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColumnReport {
    pub column: String,
    pub missing: usize,
    pub non_finite: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutlierReport {
    pub column: String,
    pub lower_fence: f64,
    pub upper_fence: f64,
    /// Row indices (into the validated slice) outside the fences.
    pub rows: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub rows: usize,
    pub columns: Vec<ColumnReport>,
    pub outliers: Vec<OutlierReport>,
    /// Counts by label code; rows with an unknown label are in `unknown_labels`.
    pub class_counts: [usize; N_CLASSES],
    pub unknown_labels: usize,
    /// Largest class count over smallest; `None` when a class is absent.
    pub imbalance_ratio: Option<f64>,
}

impl ValidationReport {
    pub fn total_missing(&self) -> usize {
        self.columns.iter().map(|c| c.missing).sum()
    }

    pub fn total_non_finite(&self) -> usize {
        self.columns.iter().map(|c| c.non_finite).sum()
    }
}

/// Linear-interpolation quantile of sorted data (the "type 7" rule).
pub fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Tukey fences `[Q1 − 1.5·IQR, Q3 + 1.5·IQR]` over the finite values.
pub fn iqr_fences(values: &[f64]) -> Option<(f64, f64)> {
    let mut v: Vec<f64> = values.iter().copied().filter(|x| x.is_finite()).collect();
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let q1 = quantile(&v, 0.25);
    let q3 = quantile(&v, 0.75);
    let iqr = q3 - q1;
    Some((q1 - 1.5 * iqr, q3 + 1.5 * iqr))
}

pub fn imbalance_ratio(counts: &[usize]) -> Option<f64> {
    let max = *counts.iter().max()?;
    let min = *counts.iter().min()?;
    (min > 0).then(|| max as f64 / min as f64)
}

/// Null, non-finite, outlier and class-balance report. Nothing is removed.
pub fn validate_records(rows: &[RawRecord]) -> ValidationReport {
    let mut columns = Vec::with_capacity(2 + N_FEATURES);
    let mut tally = |name: &str, get: &dyn Fn(&RawRecord) -> Option<f64>| {
        let mut missing = 0;
        let mut non_finite = 0;
        for r in rows {
            match get(r) {
                None => missing += 1,
                Some(v) if !v.is_finite() => non_finite += 1,
                Some(_) => {}
            }
        }
        columns.push(ColumnReport {
            column: name.to_string(),
            missing,
            non_finite,
        });
    };
    tally("ra", &|r| r.ra);
    tally("dec", &|r| r.dec);
    for k in 0..N_FEATURES {
        tally(&format!("f{}", k + 1), &|r| r.features[k]);
    }

    let mut outliers = Vec::with_capacity(N_FEATURES);
    for k in 0..N_FEATURES {
        let values: Vec<f64> = rows.iter().map(|r| r.features[k].unwrap_or(f64::NAN)).collect();
        let (lower, upper) = iqr_fences(&values).unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
        let flagged = values
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite() && (**v < lower || **v > upper))
            .map(|(i, _)| i)
            .collect();
        outliers.push(OutlierReport {
            column: format!("f{}", k + 1),
            lower_fence: lower,
            upper_fence: upper,
            rows: flagged,
        });
    }

    let mut class_counts = [0; N_CLASSES];
    let mut unknown = 0;
    for r in rows {
        match r.class.parse::<Class>() {
            Ok(c) => class_counts[c.code()] += 1,
            Err(_) => unknown += 1,
        }
    }
    ValidationReport {
        rows: rows.len(),
        columns,
        outliers,
        class_counts,
        unknown_labels: unknown,
        imbalance_ratio: imbalance_ratio(&class_counts),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(features: [Option<f64>; 6], class: &str) -> RawRecord {
        RawRecord {
            line: 0,
            object_id: "x".into(),
            ra: Some(1.0),
            dec: Some(1.0),
            features,
            class: class.into(),
        }
    }

    #[test]
    fn clean_rows_report() {
        let mut rows = Vec::new();
        for (class, n) in [("GALAXY", 4), ("QSO", 1), ("STAR", 2)] {
            for _ in 0..n {
                rows.push(raw([Some(1.0); 6], class));
            }
        }
        let rep = validate_records(&rows);
        assert_eq!(rep.total_missing(), 0);
        assert_eq!(rep.total_non_finite(), 0);
        assert_eq!(rep.class_counts, [4, 1, 2]);
        assert_eq!(rep.imbalance_ratio, Some(4.0));
    }

    #[test]
    fn catalog_imbalance() {
        let r = imbalance_ratio(&[440, 62, 498]).unwrap();
        assert!((r - 8.032258).abs() < 1e-6);
    }

    #[test]
    fn iqr_flags_single_outlier() {
        // Q1 = 1, Q3 = 1 + 0.25·99 = 25.75, upper fence = 62.875
        let (lo, hi) = iqr_fences(&[1.0, 1.0, 1.0, 100.0]).unwrap();
        assert!((hi - 62.875).abs() < 1e-12);
        assert!((lo - (1.0 - 1.5 * 24.75)).abs() < 1e-12);
        let rows: Vec<RawRecord> = [1.0, 1.0, 1.0, 100.0]
            .iter()
            .map(|&v| raw([Some(v), Some(0.0), Some(0.0), Some(0.0), Some(0.0), Some(0.0)], "STAR"))
            .collect();
        let rep = validate_records(&rows);
        assert_eq!(rep.outliers[0].rows, vec![3]);
        assert!(rep.outliers[1..].iter().all(|o| o.rows.is_empty()));
    }

    #[test]
    fn missing_and_non_finite_counted() {
        let rows = vec![
            raw([None, Some(f64::NAN), Some(1.0), Some(1.0), Some(1.0), Some(1.0)], "STAR"),
            raw([Some(1.0), Some(f64::INFINITY), Some(1.0), Some(1.0), Some(1.0), None], "PLANET"),
        ];
        let rep = validate_records(&rows);
        let by_name = |n: &str| rep.columns.iter().find(|c| c.column == n).unwrap().clone();
        assert_eq!(by_name("f1").missing, 1);
        assert_eq!(by_name("f2").non_finite, 2);
        assert_eq!(by_name("f6").missing, 1);
        assert_eq!(rep.unknown_labels, 1);
        assert_eq!(rep.imbalance_ratio, None);
    }
}
