//! The staged commands behind the `skyfusion` binary:
//! fetch → prepare → train → evaluate → predict, plus compare-baselines.
//!
//! Each stage reads the artifacts of the stages before it and fails with
//! [`Error::MissingArtifact`](crate::Error::MissingArtifact) when one is
//! absent.

mod artifacts;
mod config;
mod stages;

pub use artifacts::{read_standardized, Layout, PreparedRow, PreparedSummary, StoredModel};
pub use config::{
    config_keys, parse_override, BaselineConfig, DataConfig, IngestConfig, OutputConfig, PipelineConfig,
    DEFAULT_CATALOG_QUERY, DEFAULT_CONFIG_PATH,
};
pub use stages::{
    cmd_compare_baselines, cmd_evaluate, cmd_fetch, cmd_predict, cmd_prepare, cmd_train, read_report,
    StageOutcome,
};
