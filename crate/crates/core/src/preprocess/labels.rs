use crate::error::{Error, Result};

use super::records::{Class, N_CLASSES};

/// Code ↔ name table for the three classes, alphabetical.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct LabelTable;

impl LabelTable {
    pub fn names(&self) -> [&'static str; N_CLASSES] {
        Class::ALL.map(Class::name)
    }

    pub fn decode(&self, code: usize) -> Result<&'static str> {
        Class::from_code(code).map(Class::name)
    }

    pub fn encode(&self, name: &str) -> Result<usize> {
        name.parse::<Class>().map(Class::code)
    }
}

/// GALAXY→0, QSO→1, STAR→2. Fails on the first unknown label.
pub fn encode_labels<S: AsRef<str>>(labels: &[S]) -> Result<(Vec<usize>, LabelTable)> {
    let table = LabelTable;
    let codes = labels
        .iter()
        .map(|l| table.encode(l.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    Ok((codes, table))
}

pub fn decode_labels(codes: &[usize]) -> Result<Vec<&'static str>> {
    codes.iter().map(|&c| LabelTable.decode(c)).collect()
}

pub fn class_counts(codes: &[usize]) -> Result<[usize; N_CLASSES]> {
    let mut counts = [0; N_CLASSES];
    for &c in codes {
        *counts
            .get_mut(c)
            .ok_or_else(|| Error::Index(format!("label code {c}")))? += 1;
    }
    Ok(counts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn alphabetical_codes() {
        let (codes, table) = encode_labels(&["STAR", "GALAXY", "QSO"]).unwrap();
        assert_eq!(codes, vec![2, 0, 1]);
        assert_eq!(table.names(), ["GALAXY", "QSO", "STAR"]);
    }

    #[test]
    fn round_trip() {
        let names = ["GALAXY", "QSO", "STAR", "STAR"];
        let (codes, _) = encode_labels(&names).unwrap();
        assert_eq!(decode_labels(&codes).unwrap(), names);
    }

    #[test]
    fn unknown_label_named() {
        let err = encode_labels(&["STAR", "PLANET"]).unwrap_err();
        assert!(matches!(&err, Error::Data(m) if m.contains("PLANET")), "{err}");
        assert!(LabelTable.decode(3).is_err());
    }
}
