use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::baselines::{LogRegConfig, DEFAULT_K};
use crate::error::{Error, Result};
use crate::fusion::ModelConfig;
use crate::ingest::{CutoutRequest, FetchPolicy};
use crate::preprocess::ImageTensorSpec;
use crate::train::TrainConfig;

pub const DEFAULT_CONFIG_PATH: &str = "pipeline.json";

pub const DEFAULT_CATALOG_QUERY: &str = "SELECT TOP 1000 p.objid AS object_id, p.ra, p.dec, \
p.u AS f1, p.g AS f2, p.r AS f3, p.i AS f4, p.z AS f5, s.z AS f6, s.class AS class \
FROM PhotoObj AS p JOIN SpecObj AS s ON s.bestobjid = p.objid \
WHERE s.zWarning = 0 ORDER BY p.objid";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IngestConfig {
    /// Cutout service; a `mock://` URL serves synthetic renderings.
    pub cutout_base_url: String,
    /// Catalog SQL service; a `mock://` URL serves a synthetic catalog.
    pub catalog_base_url: String,
    pub catalog_query: String,
    pub scale: f64,
    /// Requested cutout side in pixels.
    pub side: u32,
    pub policy: FetchPolicy,
    /// Catalog size served by a mock endpoint.
    pub mock_objects: usize,
}

impl Default for IngestConfig {
    fn default() -> Self {
        IngestConfig {
            cutout_base_url: "https://skyserver.sdss.org/dr16/SkyServerWS/ImgCutout/getjpeg".into(),
            catalog_base_url: "https://skyserver.sdss.org/dr16/SkyServerWS/SearchTools/SqlSearch".into(),
            catalog_query: DEFAULT_CATALOG_QUERY.into(),
            scale: 0.1,
            side: 2048,
            policy: FetchPolicy::default(),
            mock_objects: 30,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    /// Holds the manifest, the image cache and the prepared dataset.
    pub dir: PathBuf,
    /// Local catalog CSV used instead of the catalog endpoint.
    pub catalog_path: Option<PathBuf>,
    /// Seeds the stratified split and the mock sky.
    pub seed: u64,
    pub image_side: usize,
    pub normalize: bool,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: PathBuf::from("data"),
            catalog_path: None,
            seed: 42,
            image_side: 32,
            normalize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub dir: PathBuf,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig {
            dir: PathBuf::from("output"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    pub knn_k: usize,
    pub logreg: LogRegConfig,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        BaselineConfig {
            knn_k: DEFAULT_K,
            logreg: LogRegConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PipelineConfig {
    pub ingest: IngestConfig,
    pub data: DataConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub output: OutputConfig,
    pub baselines: BaselineConfig,
}

/// Copies `patch` into `base`. Keys must already exist in `base`, except
/// below a null default or inside a `name`-tagged object whose tag changes.
fn merge(base: &mut Value, patch: Value, path: &str) -> Result<()> {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            let retag = matches!((b.get("name"), p.get("name")), (Some(x), Some(y)) if x != y);
            if retag {
                *b = p;
                return Ok(());
            }
            let open = b.contains_key("name");
            for (k, v) in p {
                let child = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v, &child)?,
                    None if open => {
                        b.insert(k, v);
                    }
                    None => return Err(Error::Config(format!("unknown config key '{child}'"))),
                }
            }
            Ok(())
        }
        (b, p) => {
            *b = p;
            Ok(())
        }
    }
}

/// Turns `a.b.c=value` into a nested patch. The value is read as JSON when
/// it parses, otherwise as a plain string.
pub fn parse_override(arg: &str) -> Result<Value> {
    let (key, raw) = arg
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{arg}' is not key=value")))?;
    let key = key.trim();
    if key.is_empty() || key.split('.').any(str::is_empty) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    for part in key.rsplit('.') {
        let mut m = Map::new();
        m.insert(part.to_string(), value);
        value = Value::Object(m);
    }
    Ok(value)
}

impl PipelineConfig {
    /// Defaults, then the config file (if any), then each `key=value`
    /// override in order.
    pub fn resolve(file: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut value = serde_json::to_value(PipelineConfig::default())?;
        if let Some(path) = file {
            let text = crate::io_util::read_to_string(path)?;
            let patch: Value = serde_json::from_str(&text).map_err(|e| Error::Format {
                path: path.to_path_buf(),
                reason: e.to_string(),
            })?;
            if !patch.is_object() {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: "top level must be an object".into(),
                });
            }
            merge(&mut value, patch, "")?;
        }
        for o in overrides {
            merge(&mut value, parse_override(o)?, "")?;
        }
        let cfg: PipelineConfig =
            serde_json::from_value(value).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.train.validate()?;
        self.ingest.policy.validate()?;
        ImageTensorSpec::new(self.data.image_side, self.data.normalize)?;
        CutoutRequest::square(0.0, 0.0, self.ingest.scale, self.ingest.side)
            .validate()
            .map_err(|e| Error::Config(e.to_string()))?;
        self.model.build(self.data.image_side)?;
        if self.baselines.knn_k == 0 {
            return Err(Error::Config("baselines.knn_k must be at least 1".into()));
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

fn flatten(prefix: &str, v: &Value, out: &mut Vec<(String, String)>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, child, out);
            }
        }
        Value::Null => out.push((prefix.to_string(), "unset".into())),
        other => out.push((prefix.to_string(), other.to_string())),
    }
}

/// Every overridable key with its default, in file order.
pub fn config_keys() -> Vec<(String, String)> {
    let mut out = Vec::new();
    let v = serde_json::to_value(PipelineConfig::default()).expect("default config serializes");
    flatten("", &v, &mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fusion::Mode;
    use crate::neural::OptimizerConfig;

    #[test]
    fn defaults_validate() {
        PipelineConfig::default().validate().unwrap();
    }

    #[test]
    fn overrides_apply_in_order() {
        let cfg = PipelineConfig::resolve(
            None,
            &[
                "train.epochs=3".into(),
                "model.mode=tabular-only".into(),
                "data.dir=/tmp/x".into(),
                "train.epochs=4".into(),
                "model.cnn_trainable=0".into(),
            ],
        )
        .unwrap();
        assert_eq!(cfg.train.epochs, 4);
        assert_eq!(cfg.model.mode, Mode::TabularOnly);
        assert_eq!(cfg.data.dir, PathBuf::from("/tmp/x"));
        assert_eq!(cfg.model.cnn_trainable, Some(0));
    }

    #[test]
    fn optimizer_can_switch_kind() {
        let cfg = PipelineConfig::resolve(
            None,
            &[r#"train.optimizer={"name":"sgd","lr":0.05}"#.into(), "train.optimizer.momentum=0.9".into()],
        )
        .unwrap();
        assert_eq!(cfg.train.optimizer, OptimizerConfig::sgd(0.05, 0.9));
    }

    #[test]
    fn unknown_key_rejected() {
        let err = PipelineConfig::resolve(None, &["train.epoch=3".into()]).unwrap_err();
        assert!(err.to_string().contains("train.epoch"));
        assert!(PipelineConfig::resolve(None, &["noequals".into()]).is_err());
    }

    #[test]
    fn invalid_values_rejected() {
        assert!(PipelineConfig::resolve(None, &["train.train_fraction=1.5".into()]).is_err());
        assert!(PipelineConfig::resolve(None, &["ingest.side=4096".into()]).is_err());
        assert!(PipelineConfig::resolve(None, &["ingest.policy.max_concurrent=0".into()]).is_err());
    }

    #[test]
    fn file_then_overrides() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.json");
        std::fs::write(&path, r#"{"train": {"epochs": 7, "batch_size": 8}}"#).unwrap();
        let cfg = PipelineConfig::resolve(Some(&path), &["train.batch_size=16".into()]).unwrap();
        assert_eq!((cfg.train.epochs, cfg.train.batch_size), (7, 16));
        std::fs::write(&path, r#"{"trian": {}}"#).unwrap();
        assert!(PipelineConfig::resolve(Some(&path), &[]).is_err());
    }

    #[test]
    fn key_listing_covers_nested_sections() {
        let keys: Vec<String> = config_keys().into_iter().map(|(k, _)| k).collect();
        for k in ["ingest.policy.max_concurrent", "data.catalog_path", "model.mode", "train.optimizer.lr", "output.dir"] {
            assert!(keys.iter().any(|x| x == k), "{k}");
        }
    }
}
