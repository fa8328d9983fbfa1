use std::collections::HashSet;
use std::fmt;
use std::io::Read;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::io_util::write_atomic;
use crate::preprocess::{CatalogRecord, Class, Features, N_FEATURES};

pub const MANIFEST_COLUMNS: [&str; 13] = [
    "object_id", "ra", "dec", "class", "f1", "f2", "f3", "f4", "f5", "f6", "image_path", "split", "status",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SplitTag {
    Train,
    Val,
    Unassigned,
}

impl SplitTag {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitTag::Train => "train",
            SplitTag::Val => "val",
            SplitTag::Unassigned => "unassigned",
        }
    }
}

impl FromStr for SplitTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "train" => Ok(SplitTag::Train),
            "val" => Ok(SplitTag::Val),
            "unassigned" => Ok(SplitTag::Unassigned),
            other => Err(Error::Data(format!("unknown split '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FetchStatus {
    Pending,
    Fetched,
    Failed(String),
}

impl fmt::Display for FetchStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            FetchStatus::Pending => f.write_str("pending"),
            FetchStatus::Fetched => f.write_str("fetched"),
            FetchStatus::Failed(reason) => write!(f, "failed:{reason}"),
        }
    }
}

impl FromStr for FetchStatus {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pending" => Ok(FetchStatus::Pending),
            "fetched" => Ok(FetchStatus::Fetched),
            _ => s
                .strip_prefix("failed:")
                .map(|r| FetchStatus::Failed(r.to_string()))
                .ok_or_else(|| Error::Data(format!("unknown fetch status '{s}'"))),
        }
    }
}

/// Object ids become file names, so they are restricted to a safe alphabet.
pub fn check_object_id(id: &str) -> Result<()> {
    let ok = !id.is_empty()
        && !id.starts_with('.')
        && id
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.' | '+'));
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(format!("object_id '{id}' is not usable as a file name")))
    }
}

/// Cache location of an object's cutout, relative to the data directory.
pub fn image_relpath(object_id: &str) -> String {
    format!("images/{object_id}.jpg")
}

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestRow {
    pub object_id: String,
    pub ra: f64,
    pub dec: f64,
    pub class: Class,
    pub features: Features,
    /// Relative to the data directory; empty until the cutout is cached.
    pub image_path: String,
    pub split: SplitTag,
    pub status: FetchStatus,
}

impl ManifestRow {
    pub fn from_record(r: &CatalogRecord) -> Self {
        ManifestRow {
            object_id: r.object_id.clone(),
            ra: r.ra,
            dec: r.dec,
            class: r.label,
            features: r.features,
            image_path: String::new(),
            split: SplitTag::Unassigned,
            status: FetchStatus::Pending,
        }
    }

    pub fn record(&self) -> Result<CatalogRecord> {
        CatalogRecord::new(self.object_id.clone(), self.ra, self.dec, self.features, self.class)
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DatasetManifest {
    pub rows: Vec<ManifestRow>,
}

impl DatasetManifest {
    pub fn from_records(records: &[CatalogRecord]) -> Result<Self> {
        let m = DatasetManifest {
            rows: records.iter().map(ManifestRow::from_record).collect(),
        };
        m.check_ids()?;
        Ok(m)
    }

    fn check_ids(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for r in &self.rows {
            check_object_id(&r.object_id)?;
            if !seen.insert(r.object_id.as_str()) {
                return Err(Error::Data(format!("duplicate object_id '{}'", r.object_id)));
            }
        }
        Ok(())
    }

    /// Every fetched row must point at an existing file.
    pub fn check_images(&self, data_dir: &Path) -> Result<()> {
        for r in &self.rows {
            if r.status == FetchStatus::Fetched && !data_dir.join(&r.image_path).is_file() {
                return Err(Error::Data(format!(
                    "{}: marked fetched but {} is missing",
                    r.object_id, r.image_path
                )));
            }
        }
        Ok(())
    }

    pub fn count_status(&self, pred: impl Fn(&FetchStatus) -> bool) -> usize {
        self.rows.iter().filter(|r| pred(&r.status)).count()
    }

    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(MANIFEST_COLUMNS)?;
        for r in &self.rows {
            let mut cells = vec![
                r.object_id.clone(),
                r.ra.to_string(),
                r.dec.to_string(),
                r.class.name().to_string(),
            ];
            cells.extend(r.features.iter().map(f64::to_string));
            cells.push(r.image_path.clone());
            cells.push(r.split.as_str().to_string());
            cells.push(r.status.to_string());
            w.write_record(&cells)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
        Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
    }

    pub fn parse<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().from_reader(reader);
        let headers = rdr.headers()?.clone();
        if headers.iter().ne(MANIFEST_COLUMNS.iter().copied()) {
            return Err(Error::Data(format!(
                "manifest header must be {}",
                MANIFEST_COLUMNS.join(",")
            )));
        }
        let mut rows = Vec::new();
        for result in rdr.records() {
            let rec = result?;
            let line = rec.position().map_or(0, |p| p.line());
            let at = |e: Error| Error::Data(format!("manifest line {line}: {e}"));
            let num = |i: usize| -> Result<f64> {
                rec[i]
                    .parse::<f64>()
                    .map_err(|_| at(Error::Data(format!("'{}' is not a number", &rec[i]))))
            };
            let mut features = [0.0; N_FEATURES];
            for (k, f) in features.iter_mut().enumerate() {
                *f = num(4 + k)?;
            }
            rows.push(ManifestRow {
                object_id: rec[0].to_string(),
                ra: num(1)?,
                dec: num(2)?,
                class: rec[3].parse().map_err(at)?,
                features,
                image_path: rec[10].to_string(),
                split: rec[11].parse().map_err(at)?,
                status: rec[12].parse().map_err(at)?,
            });
        }
        let m = DatasetManifest { rows };
        m.check_ids()?;
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_csv()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        Self::parse(file)
    }
}

pub fn manifest_path(data_dir: &Path) -> PathBuf {
    data_dir.join("manifest.csv")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> DatasetManifest {
        let recs = vec![
            CatalogRecord::new("1237", 184.9511, -0.8754, [19.1, 18.2, 17.9, 17.7, 17.6, 0.05], Class::Galaxy).unwrap(),
            CatalogRecord::new("x-2", 0.1, 89.5, [18.0, 17.5, 17.3, 17.2, 17.1, 1.9], Class::Qso).unwrap(),
        ];
        let mut m = DatasetManifest::from_records(&recs).unwrap();
        m.rows[0].image_path = image_relpath("1237");
        m.rows[0].status = FetchStatus::Fetched;
        m.rows[0].split = SplitTag::Train;
        m.rows[1].status = FetchStatus::Failed("HTTP 503, gave up".into());
        m
    }

    #[test]
    fn round_trip_is_lossless() {
        let m = sample();
        let text = m.to_csv().unwrap();
        assert!(text.starts_with("object_id,ra,dec,class,f1,f2,f3,f4,f5,f6,image_path,split,status\n"));
        assert_eq!(DatasetManifest::parse(text.as_bytes()).unwrap(), m);
    }

    #[test]
    fn unsafe_ids_rejected() {
        for id in ["", "../x", "a/b", ".hidden"] {
            assert!(check_object_id(id).is_err(), "{id}");
        }
        assert!(check_object_id("1237648720693755918").is_ok());
    }

    #[test]
    fn fetched_rows_need_files() {
        let dir = tempfile::tempdir().unwrap();
        let m = sample();
        assert!(m.check_images(dir.path()).is_err());
        std::fs::create_dir_all(dir.path().join("images")).unwrap();
        std::fs::write(dir.path().join("images/1237.jpg"), b"\xff\xd8\xff").unwrap();
        assert!(m.check_images(dir.path()).is_ok());
    }
}
