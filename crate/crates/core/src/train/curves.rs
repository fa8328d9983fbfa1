use std::path::Path;

use crate::error::{Error, Result};

use super::trainer::EpochRecord;

pub const CURVE_HEADER: &str = "epoch,train_loss,train_acc,val_loss,val_acc";

/// CSV text of a training history, six decimals per value.
pub fn curves_csv(history: &[EpochRecord]) -> String {
    let mut out = String::from(CURVE_HEADER);
    out.push('\n');
    for r in history {
        out.push_str(&format!(
            "{},{:.6},{:.6},{:.6},{:.6}\n",
            r.epoch, r.train_loss, r.train_accuracy, r.val_loss, r.val_accuracy
        ));
    }
    out
}

pub fn emit_curves(history: &[EpochRecord], path: &Path) -> Result<()> {
    if history.is_empty() {
        return Err(Error::Data("no epochs to write".into()));
    }
    crate::io_util::write_atomic(path, curves_csv(history).as_bytes())
}

pub fn parse_curves(text: &str) -> Result<Vec<EpochRecord>> {
    let mut lines = text.lines();
    if lines.next() != Some(CURVE_HEADER) {
        return Err(Error::Data("curve file header mismatch".into()));
    }
    lines
        .enumerate()
        .map(|(i, line)| {
            let bad = || Error::Data(format!("curve line {}: '{line}'", i + 2));
            let cells: Vec<&str> = line.split(',').collect();
            if cells.len() != 5 {
                return Err(bad());
            }
            let num = |s: &str| s.parse::<f64>().map_err(|_| bad());
            Ok(EpochRecord {
                epoch: cells[0].parse().map_err(|_| bad())?,
                train_loss: num(cells[1])?,
                train_accuracy: num(cells[2])?,
                val_loss: num(cells[3])?,
                val_accuracy: num(cells[4])?,
            })
        })
        .collect()
}

/// Per-epoch `val_acc − train_acc` and its last value (0 for an empty
/// history).
#[derive(Debug, Clone, PartialEq)]
pub struct GapSummary {
    pub per_epoch: Vec<f64>,
    pub last: f64,
}

pub fn train_test_gap(history: &[EpochRecord]) -> GapSummary {
    let per_epoch: Vec<f64> = history
        .iter()
        .map(|r| r.val_accuracy - r.train_accuracy)
        .collect();
    let last = per_epoch.last().copied().unwrap_or(0.0);
    GapSummary { per_epoch, last }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(epoch: usize, loss: f64, tr: f64, va: f64) -> EpochRecord {
        EpochRecord {
            epoch,
            train_loss: loss,
            train_accuracy: tr,
            val_loss: loss * 1.1,
            val_accuracy: va,
        }
    }

    #[test]
    fn one_epoch_two_lines() {
        let text = curves_csv(&[rec(1, 0.5, 0.8, 0.7)]);
        assert_eq!(text.lines().count(), 2);
        assert_eq!(text.lines().nth(1).unwrap(), "1,0.500000,0.800000,0.550000,0.700000");
    }

    #[test]
    fn round_trip_to_six_decimals() {
        let h = vec![rec(1, 1.234_567_89, 0.333_333_3, 0.25), rec(2, 0.987_654_3, 0.5, 0.666_666_7)];
        let back = parse_curves(&curves_csv(&h)).unwrap();
        for (a, b) in h.iter().zip(&back) {
            assert_eq!(a.epoch, b.epoch);
            assert!((a.train_loss - b.train_loss).abs() <= 5e-7);
            assert!((a.val_accuracy - b.val_accuracy).abs() <= 5e-7);
        }
    }

    #[test]
    fn monotone_loss_stays_monotone() {
        let h: Vec<_> = (1..=6).map(|e| rec(e, 1.0 / e as f64, 0.5, 0.5)).collect();
        let back = parse_curves(&curves_csv(&h)).unwrap();
        assert!(back.windows(2).all(|w| w[1].train_loss < w[0].train_loss));
    }

    #[test]
    fn empty_history_not_written() {
        let dir = tempfile::tempdir().unwrap();
        assert!(emit_curves(&[], &dir.path().join("c.csv")).is_err());
    }

    #[test]
    fn unwritable_path_is_io_error() {
        let dir = tempfile::tempdir().unwrap();
        let blocker = dir.path().join("file");
        std::fs::write(&blocker, b"x").unwrap();
        let err = emit_curves(&[rec(1, 0.1, 0.1, 0.1)], &blocker.join("c.csv")).unwrap_err();
        assert!(matches!(err, Error::Io { .. }));
    }

    #[test]
    fn gap_series() {
        let equal = vec![rec(1, 0.1, 0.7, 0.7), rec(2, 0.1, 0.8, 0.8)];
        assert_eq!(train_test_gap(&equal).per_epoch, vec![0.0, 0.0]);
        let g = train_test_gap(&[rec(1, 0.1, 0.5, 0.5), rec(2, 0.1, 0.99, 0.90)]);
        assert_eq!(g.per_epoch.len(), 2);
        assert!((g.last + 0.09).abs() < 1e-12);
    }
}
