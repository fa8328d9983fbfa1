use std::fmt;
use std::io::Read;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const N_FEATURES: usize = 6;
pub const N_CLASSES: usize = 3;

pub type Features = [f64; N_FEATURES];

/// Column names of the catalog CSV, in canonical order.
pub const CATALOG_COLUMNS: [&str; 10] = ["object_id", "ra", "dec", "f1", "f2", "f3", "f4", "f5", "f6", "class"];

/// Object class. Discriminants are the alphabetical label codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Class {
    Galaxy = 0,
    Qso = 1,
    Star = 2,
}

impl Class {
    pub const ALL: [Class; N_CLASSES] = [Class::Galaxy, Class::Qso, Class::Star];

    pub fn code(self) -> usize {
        self as usize
    }

    pub fn from_code(code: usize) -> Result<Class> {
        Class::ALL
            .get(code)
            .copied()
            .ok_or_else(|| Error::Index(format!("class code {code}")))
    }

    pub fn name(self) -> &'static str {
        match self {
            Class::Galaxy => "GALAXY",
            Class::Qso => "QSO",
            Class::Star => "STAR",
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Class {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "GALAXY" => Ok(Class::Galaxy),
            "QSO" => Ok(Class::Qso),
            "STAR" => Ok(Class::Star),
            other => Err(Error::Data(format!("unknown class label '{other}'"))),
        }
    }
}

/// One validated catalog object.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogRecord {
    pub object_id: String,
    pub ra: f64,
    pub dec: f64,
    pub features: Features,
    pub label: Class,
}

pub fn check_coordinates(ra: f64, dec: f64) -> Result<()> {
    if !(0.0..360.0).contains(&ra) {
        return Err(Error::Validation(format!("ra {ra} outside [0, 360)")));
    }
    if !(-90.0..=90.0).contains(&dec) {
        return Err(Error::Validation(format!("dec {dec} outside [-90, 90]")));
    }
    Ok(())
}

impl CatalogRecord {
    pub fn new(object_id: impl Into<String>, ra: f64, dec: f64, features: Features, label: Class) -> Result<Self> {
        let object_id = object_id.into();
        if object_id.is_empty() {
            return Err(Error::Data("empty object_id".into()));
        }
        check_coordinates(ra, dec)?;
        if let Some(i) = features.iter().position(|v| !v.is_finite()) {
            return Err(Error::Data(format!("{object_id}: feature f{} is not finite", i + 1)));
        }
        Ok(CatalogRecord {
            object_id,
            ra,
            dec,
            features,
            label,
        })
    }
}

/// A catalog row as read, before any value is required to be present or
/// finite. `None` marks an empty cell.
#[derive(Debug, Clone, PartialEq)]
pub struct RawRecord {
    /// 1-based line number in the source text (header is line 1).
    pub line: u64,
    pub object_id: String,
    pub ra: Option<f64>,
    pub dec: Option<f64>,
    pub features: [Option<f64>; N_FEATURES],
    pub class: String,
}

impl RawRecord {
    pub fn from_record(r: &CatalogRecord) -> Self {
        RawRecord {
            line: 0,
            object_id: r.object_id.clone(),
            ra: Some(r.ra),
            dec: Some(r.dec),
            features: r.features.map(Some),
            class: r.label.name().to_string(),
        }
    }

    pub fn to_record(&self) -> Result<CatalogRecord> {
        let at = |what: &str| Error::Data(format!("line {}: {what}", self.line));
        let ra = self.ra.ok_or_else(|| at("missing ra"))?;
        let dec = self.dec.ok_or_else(|| at("missing dec"))?;
        let mut features = [0.0; N_FEATURES];
        for (i, v) in self.features.iter().enumerate() {
            features[i] = v.ok_or_else(|| at(&format!("missing f{}", i + 1)))?;
        }
        let label: Class = self
            .class
            .parse()
            .map_err(|e: Error| at(&e.to_string()))?;
        CatalogRecord::new(self.object_id.clone(), ra, dec, features, label)
            .map_err(|e| at(&e.to_string()))
    }
}

fn parse_cell(cell: &str, line: u64, column: &str) -> Result<Option<f64>> {
    let cell = cell.trim();
    if cell.is_empty() {
        return Ok(None);
    }
    cell.parse::<f64>()
        .map(Some)
        .map_err(|_| Error::Data(format!("line {line}: column {column}: '{cell}' is not a number")))
}

/// Reads catalog CSV text. Columns are located by header name; every one of
/// [`CATALOG_COLUMNS`] must be present. Lines starting with `#` are skipped.
pub fn parse_catalog<R: Read>(reader: R) -> Result<Vec<RawRecord>> {
    let mut rdr = csv::ReaderBuilder::new()
        .flexible(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let position = |name: &str| headers.iter().position(|h| h.eq_ignore_ascii_case(name));
    let missing: Vec<&str> = CATALOG_COLUMNS
        .iter()
        .copied()
        .filter(|c| position(c).is_none())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Data(format!(
            "catalog is missing columns: {}",
            missing.join(", ")
        )));
    }
    let idx: Vec<usize> = CATALOG_COLUMNS
        .iter()
        .map(|c| position(c).expect("checked above"))
        .collect();

    let mut rows = Vec::new();
    for result in rdr.records() {
        let rec = result?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != headers.len() {
            return Err(Error::Data(format!(
                "line {line}: expected {} fields, found {}",
                headers.len(),
                rec.len()
            )));
        }
        let get = |i: usize| rec.get(idx[i]).unwrap_or("");
        let mut features = [None; N_FEATURES];
        for (k, f) in features.iter_mut().enumerate() {
            *f = parse_cell(get(3 + k), line, CATALOG_COLUMNS[3 + k])?;
        }
        rows.push(RawRecord {
            line,
            object_id: get(0).to_string(),
            ra: parse_cell(get(1), line, "ra")?,
            dec: parse_cell(get(2), line, "dec")?,
            features,
            class: get(9).to_string(),
        });
    }
    Ok(rows)
}

/// Parses and validates every row; the first bad row aborts with its line
/// number.
pub fn read_catalog<R: Read>(reader: R) -> Result<Vec<CatalogRecord>> {
    let rows = parse_catalog(reader)?;
    let mut seen = std::collections::HashSet::new();
    let mut out = Vec::with_capacity(rows.len());
    for raw in &rows {
        let rec = raw.to_record()?;
        if !seen.insert(rec.object_id.clone()) {
            return Err(Error::Data(format!(
                "line {}: duplicate object_id '{}'",
                raw.line, rec.object_id
            )));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn write_catalog(records: &[CatalogRecord]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(CATALOG_COLUMNS)?;
    for r in records {
        let mut row = vec![r.object_id.clone(), r.ra.to_string(), r.dec.to_string()];
        row.extend(r.features.iter().map(f64::to_string));
        row.push(r.label.name().to_string());
        w.write_record(&row)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

#[cfg(test)]
mod tests {
    use super::*;

    const FIXTURE: &str = "\
object_id,ra,dec,f1,f2,f3,f4,f5,f6,class
a,10.5,-3.25,19.1,18.2,17.9,17.7,17.6,0.05,GALAXY
b,200.0,45.0,18.0,17.5,17.3,17.2,17.1,1.9,QSO
c,0.0,90.0,16.0,15.1,14.8,14.7,14.6,0.0001,STAR
d,359.99,-90.0,19.0,18.1,17.0,16.9,16.5,0.1,GALAXY
e,120.0,12.0,17.0,16.5,16.4,16.3,16.3,0.0,STAR
";

    #[test]
    fn parses_five_rows() {
        let recs = read_catalog(FIXTURE.as_bytes()).unwrap();
        assert_eq!(recs.len(), 5);
        assert_eq!(recs[1].label, Class::Qso);
        assert_eq!(recs[0].features[5], 0.05);
    }

    #[test]
    fn short_row_names_its_line() {
        let text = "object_id,ra,dec,f1,f2,f3,f4,f5,f6,class\nx,1,2,1,2,3,4,5,STAR\n";
        let err = read_catalog(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("line 2"), "{err}");
    }

    #[test]
    fn missing_columns_listed() {
        let text = "object_id,ra,f1,f2,f3,f4,f5,class\n";
        let err = parse_catalog(text.as_bytes()).unwrap_err().to_string();
        assert!(err.contains("dec") && err.contains("f6"), "{err}");
    }

    #[test]
    fn columns_found_by_name_and_comments_skipped() {
        let text = "#Table1\nclass,f6,f5,f4,f3,f2,f1,dec,ra,object_id\nSTAR,6,5,4,3,2,1,0.5,10,z\n";
        let recs = read_catalog(text.as_bytes()).unwrap();
        assert_eq!(recs[0].features, [1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        assert_eq!(recs[0].object_id, "z");
    }

    #[test]
    fn unknown_label_is_data_error() {
        assert!(matches!("PLANET".parse::<Class>(), Err(Error::Data(m)) if m.contains("PLANET")));
    }

    #[test]
    fn coordinate_ranges() {
        let f = [0.0; 6];
        assert!(CatalogRecord::new("a", 360.0, 0.0, f, Class::Star).is_err());
        assert!(CatalogRecord::new("a", 0.0, 90.5, f, Class::Star).is_err());
        assert!(CatalogRecord::new("a", 359.9, -90.0, f, Class::Star).is_ok());
    }

    #[test]
    fn write_then_read_is_lossless() {
        let recs = read_catalog(FIXTURE.as_bytes()).unwrap();
        let text = write_catalog(&recs).unwrap();
        assert_eq!(read_catalog(text.as_bytes()).unwrap(), recs);
    }
}
