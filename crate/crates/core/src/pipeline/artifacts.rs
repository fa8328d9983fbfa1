use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::{Mode, IMAGE_BRANCH, TABULAR_BRANCH};
use crate::ingest::SplitTag;
use crate::neural::{ModelSpec, Tensor};
use crate::preprocess::{load_image, Class, Features, ImageTensorSpec, ValidationReport, N_FEATURES};
use crate::train::Dataset;

use super::config::PipelineConfig;

/// Where each stage leaves its output.
pub struct Layout {
    pub data_dir: PathBuf,
    pub output_dir: PathBuf,
}

impl Layout {
    pub fn new(cfg: &PipelineConfig) -> Self {
        Layout {
            data_dir: cfg.data.dir.clone(),
            output_dir: cfg.output.dir.clone(),
        }
    }

    pub fn manifest(&self) -> PathBuf {
        crate::ingest::manifest_path(&self.data_dir)
    }
    pub fn scaler(&self) -> PathBuf {
        self.data_dir.join("scaler.json")
    }
    pub fn standardized(&self) -> PathBuf {
        self.data_dir.join("standardized.csv")
    }
    pub fn prepared(&self) -> PathBuf {
        self.data_dir.join("prepared.json")
    }
    pub fn checkpoint(&self) -> PathBuf {
        self.output_dir.join("checkpoint.bin")
    }
    pub fn curves(&self) -> PathBuf {
        self.output_dir.join("curves.csv")
    }
    pub fn model(&self) -> PathBuf {
        self.output_dir.join("model.json")
    }
    pub fn report(&self) -> PathBuf {
        self.output_dir.join("report.json")
    }
    pub fn predictions(&self) -> PathBuf {
        self.output_dir.join("predictions.csv")
    }
    pub fn leaderboard(&self) -> PathBuf {
        self.output_dir.join("leaderboard.csv")
    }
}

/// Fails with a staged-pipeline error when `path` is absent.
pub fn require(path: &Path, artifact: &str, stage: &str) -> Result<()> {
    if path.is_file() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            artifact: artifact.to_string(),
            path: path.to_path_buf(),
            stage: stage.to_string(),
        })
    }
}

/// One standardized row of the prepared dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct PreparedRow {
    pub object_id: String,
    pub split: SplitTag,
    pub class: Class,
    pub features: Features,
    pub image_path: String,
}

const STANDARDIZED_HEADER: [&str; 10] = ["object_id", "split", "class", "z1", "z2", "z3", "z4", "z5", "z6", "image_path"];

pub fn write_standardized(path: &Path, rows: &[PreparedRow]) -> Result<()> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(STANDARDIZED_HEADER)?;
    for r in rows {
        let mut cells = vec![r.object_id.clone(), r.split.as_str().into(), r.class.name().into()];
        cells.extend(r.features.iter().map(f64::to_string));
        cells.push(r.image_path.clone());
        w.write_record(&cells)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Data(e.to_string()))?;
    crate::io_util::write_atomic(path, &bytes)
}

pub fn read_standardized(path: &Path) -> Result<Vec<PreparedRow>> {
    let bad = |reason: String| Error::Format {
        path: path.to_path_buf(),
        reason,
    };
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::Reader::from_reader(file);
    if rdr.headers()?.iter().ne(STANDARDIZED_HEADER.iter().copied()) {
        return Err(bad("unexpected header".into()));
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let mut features = [0.0; N_FEATURES];
        for (k, f) in features.iter_mut().enumerate() {
            *f = rec[3 + k]
                .parse()
                .map_err(|_| bad(format!("'{}' is not a number", &rec[3 + k])))?;
        }
        rows.push(PreparedRow {
            object_id: rec[0].to_string(),
            split: rec[1].parse()?,
            class: rec[2].parse()?,
            features,
            image_path: rec[9].to_string(),
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PreparedSummary {
    pub mode: Mode,
    pub eligible_rows: usize,
    pub train_rows: usize,
    pub val_rows: usize,
    pub train_class_counts: Vec<usize>,
    pub class_weights: Vec<f64>,
    pub validation: ValidationReport,
}

/// What `evaluate` and `predict` need to rebuild the trained network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredModel {
    pub mode: Mode,
    pub image: ImageTensorSpec,
    pub spec: ModelSpec,
}

/// One input tensor per branch of `spec`, in branch order.
pub fn branch_inputs(spec: &ModelSpec, rows: &[(&Features, &Path)], image: ImageTensorSpec) -> Result<Vec<Tensor>> {
    spec.branches
        .iter()
        .map(|branch| {
            let mut shape = vec![rows.len()];
            shape.extend(&branch.input_shape);
            if rows.is_empty() {
                return Ok(Tensor::zeros(shape));
            }
            match branch.name.as_str() {
                TABULAR_BRANCH => Tensor::from_rows(&rows.iter().map(|(f, _)| f.to_vec()).collect::<Vec<_>>()),
                IMAGE_BRANCH => {
                    let images = rows
                        .iter()
                        .map(|(_, path)| {
                            if !path.is_file() {
                                return Err(Error::MissingArtifact {
                                    artifact: "cutout".into(),
                                    path: path.to_path_buf(),
                                    stage: "fetch".into(),
                                });
                            }
                            load_image(path, image)
                        })
                        .collect::<Result<Vec<_>>>()?;
                    Tensor::stack(&images)
                }
                other => Err(Error::Config(format!("no input source for branch '{other}'"))),
            }
        })
        .collect()
}

pub fn dataset_for(spec: &ModelSpec, rows: &[&PreparedRow], data_dir: &Path, image: ImageTensorSpec) -> Result<Dataset> {
    let paths: Vec<PathBuf> = rows.iter().map(|r| data_dir.join(&r.image_path)).collect();
    let pairs: Vec<(&Features, &Path)> = rows
        .iter()
        .zip(&paths)
        .map(|(r, p)| (&r.features, p.as_path()))
        .collect();
    let labels = rows.iter().map(|r| r.class.code()).collect();
    Dataset::new(branch_inputs(spec, &pairs, image)?, labels)
}
