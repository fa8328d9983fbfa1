use std::path::{Path, PathBuf};

use crate::baselines::{
    gnb_fit, gnb_predict, knn_fit, knn_predict, leaderboard_csv, logreg_fit, logreg_predict, LeaderboardRow,
};
use crate::error::{Error, Result};
use crate::fusion::{self, Mode, ModelConfig};
use crate::ingest::{
    fetch_catalog, fetch_cutouts, image_relpath, is_mock_url, CutoutTemplate, DatasetManifest, FetchStatus,
    HttpTransport, MockSky, SplitTag, Transport,
};
use crate::io_util::write_atomic;
use crate::neural::{checkpoint, Network};
use crate::preprocess::{
    class_counts, compute_class_weights, parse_catalog, read_catalog, stratified_split, validate_records,
    ImageTensorSpec, RawRecord, ScalerState, N_CLASSES,
};
use crate::train::{emit_curves, evaluate_labels, parse_curves, train, train_test_gap, EvalReport};

use super::artifacts::{
    branch_inputs, dataset_for, read_standardized, require, write_standardized, Layout, PreparedRow,
    PreparedSummary, StoredModel,
};
use super::config::PipelineConfig;

/// What a stage did: a line per notable fact, plus warnings that did not
/// stop it.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct StageOutcome {
    pub lines: Vec<String>,
    pub warnings: Vec<String>,
    pub artifacts: Vec<PathBuf>,
}

fn image_spec(cfg: &PipelineConfig) -> Result<ImageTensorSpec> {
    ImageTensorSpec::new(cfg.data.image_side, cfg.data.normalize)
}

fn http(cfg: &PipelineConfig) -> HttpTransport {
    HttpTransport::new(cfg.ingest.policy.timeout())
}

fn load_manifest(layout: &Layout) -> Result<DatasetManifest> {
    let path = layout.manifest();
    require(&path, "manifest", "fetch")?;
    DatasetManifest::load(&path)
}

/// Builds (or resumes) the manifest and caches every missing cutout.
pub fn cmd_fetch(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let layout = Layout::new(cfg);
    let mut out = StageOutcome::default();
    let mpath = layout.manifest();
    let mut manifest = if mpath.is_file() {
        out.lines.push(format!("resuming {}", mpath.display()));
        DatasetManifest::load(&mpath)?
    } else {
        let records = match &cfg.data.catalog_path {
            Some(path) => {
                let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
                read_catalog(file)?
            }
            None if is_mock_url(&cfg.ingest.catalog_base_url) => {
                let sky = MockSky::synthetic(cfg.ingest.mock_objects, cfg.data.seed)?;
                fetch_catalog(&sky, &cfg.ingest.catalog_base_url, &cfg.ingest.catalog_query)?
            }
            None => fetch_catalog(&http(cfg), &cfg.ingest.catalog_base_url, &cfg.ingest.catalog_query)?,
        };
        out.lines.push(format!("catalog: {} objects", records.len()));
        DatasetManifest::from_records(&records)?
    };

    let template = CutoutTemplate {
        scale: cfg.ingest.scale,
        side: cfg.ingest.side,
    };
    let transport: Box<dyn Transport> = if is_mock_url(&cfg.ingest.cutout_base_url) {
        let records = manifest
            .rows
            .iter()
            .map(|r| r.record())
            .collect::<Result<Vec<_>>>()?;
        Box::new(MockSky::new(records, cfg.data.seed))
    } else {
        Box::new(http(cfg))
    };
    let summary = fetch_cutouts(
        &mut manifest,
        &layout.data_dir,
        &cfg.ingest.cutout_base_url,
        template,
        &cfg.ingest.policy,
        transport.as_ref(),
    )?;
    manifest.save(&mpath)?;
    out.lines.push(format!(
        "cutouts: {} fetched, {} already cached, {} failed",
        summary.fetched, summary.skipped, summary.failed
    ));
    if summary.failed > 0 {
        out.warnings.push(format!(
            "{} cutouts failed; rerun fetch to retry them",
            summary.failed
        ));
    }
    out.artifacts.push(mpath);
    Ok(out)
}

/// Validates the catalog, splits it, fits the scaler and writes the
/// standardized dataset.
pub fn cmd_prepare(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let layout = Layout::new(cfg);
    let mut manifest = load_manifest(&layout)?;
    let mut out = StageOutcome::default();

    let raw: Vec<RawRecord> = manifest
        .rows
        .iter()
        .map(|r| r.record().map(|rec| RawRecord::from_record(&rec)))
        .collect::<Result<_>>()?;
    let validation = validate_records(&raw);
    for o in validation.outliers.iter().filter(|o| !o.rows.is_empty()) {
        out.warnings
            .push(format!("{}: {} rows outside the IQR fences", o.column, o.rows.len()));
    }

    let mode = cfg.model.mode;
    let eligible: Vec<usize> = (0..manifest.rows.len())
        .filter(|&i| {
            let row = &manifest.rows[i];
            !mode.uses_images()
                || (row.status == FetchStatus::Fetched && layout.data_dir.join(&row.image_path).is_file())
        })
        .collect();
    if eligible.len() < manifest.rows.len() {
        out.warnings.push(format!(
            "{} rows without a cached cutout left unassigned",
            manifest.rows.len() - eligible.len()
        ));
    }
    let labels: Vec<usize> = eligible.iter().map(|&i| manifest.rows[i].class.code()).collect();
    let split = stratified_split(&labels, N_CLASSES, cfg.train.train_fraction, cfg.data.seed)?;
    for row in &mut manifest.rows {
        row.split = SplitTag::Unassigned;
    }
    for &k in &split.train {
        manifest.rows[eligible[k]].split = SplitTag::Train;
    }
    for &k in &split.validation {
        manifest.rows[eligible[k]].split = SplitTag::Val;
    }

    let train_features: Vec<_> = split.train.iter().map(|&k| manifest.rows[eligible[k]].features).collect();
    let scaler = ScalerState::fit(&train_features)?;
    let train_labels: Vec<usize> = split.train.iter().map(|&k| labels[k]).collect();
    let counts = class_counts(&train_labels)?;
    let weights = compute_class_weights(&counts)?;

    let prepared: Vec<PreparedRow> = eligible
        .iter()
        .map(|&i| {
            let r = &manifest.rows[i];
            PreparedRow {
                object_id: r.object_id.clone(),
                split: r.split,
                class: r.class,
                features: scaler.transform_row(&r.features),
                image_path: if r.status == FetchStatus::Fetched {
                    r.image_path.clone()
                } else {
                    String::new()
                },
            }
        })
        .collect();

    scaler.save(&layout.scaler())?;
    write_standardized(&layout.standardized(), &prepared)?;
    let summary = PreparedSummary {
        mode,
        eligible_rows: eligible.len(),
        train_rows: split.train.len(),
        val_rows: split.validation.len(),
        train_class_counts: counts.to_vec(),
        class_weights: weights.0.clone(),
        validation,
    };
    write_atomic(&layout.prepared(), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    manifest.save(&layout.manifest())?;

    out.lines.push(format!(
        "split: {} train / {} val (train class counts {:?})",
        split.train.len(),
        split.validation.len(),
        counts
    ));
    out.lines.push(format!(
        "class weights: {}",
        weights.0.iter().map(|w| format!("{w:.6}")).collect::<Vec<_>>().join(", ")
    ));
    out.artifacts.extend([layout.scaler(), layout.standardized(), layout.prepared(), layout.manifest()]);
    Ok(out)
}

fn load_prepared(layout: &Layout) -> Result<Vec<PreparedRow>> {
    require(&layout.manifest(), "manifest", "fetch")?;
    require(&layout.standardized(), "standardized dataset", "prepare")?;
    require(&layout.scaler(), "scaler", "prepare")?;
    read_standardized(&layout.standardized())
}

fn rows_in(rows: &[PreparedRow], split: SplitTag) -> Vec<&PreparedRow> {
    rows.iter().filter(|r| r.split == split).collect()
}

fn check_mode(rows: &[PreparedRow], mode: Mode) -> Result<()> {
    if mode.uses_images() && rows.iter().any(|r| r.image_path.is_empty()) {
        return Err(Error::Config(format!(
            "prepared dataset lacks cutouts needed by mode {mode:?}; rerun prepare with this mode"
        )));
    }
    Ok(())
}

/// Trains the configured model and writes its checkpoint and curves.
pub fn cmd_train(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let layout = Layout::new(cfg);
    let rows = load_prepared(&layout)?;
    check_mode(&rows, cfg.model.mode)?;
    let image = image_spec(cfg)?;
    let spec = cfg.model.build(cfg.data.image_side)?;
    let train_set = dataset_for(&spec, &rows_in(&rows, SplitTag::Train), &layout.data_dir, image)?;
    let val_set = dataset_for(&spec, &rows_in(&rows, SplitTag::Val), &layout.data_dir, image)?;

    let model = Network::init(spec.clone(), cfg.train.seed)?;
    let (model, history) = train(model, &train_set, &val_set, &cfg.train)?;

    let mut out = StageOutcome::default();
    checkpoint::save(&layout.checkpoint(), model.params())?;
    let stored = StoredModel {
        mode: cfg.model.mode,
        image,
        spec,
    };
    write_atomic(&layout.model(), serde_json::to_string_pretty(&stored)?.as_bytes())?;
    out.artifacts.extend([layout.checkpoint(), layout.model()]);
    match history.last() {
        Some(last) => {
            emit_curves(&history, &layout.curves())?;
            out.artifacts.push(layout.curves());
            out.lines.push(format!(
                "epoch {}: train loss {:.6} acc {:.4}, val loss {:.6} acc {:.4}",
                last.epoch, last.train_loss, last.train_accuracy, last.val_loss, last.val_accuracy
            ));
        }
        None => out.warnings.push("zero epochs: parameters left at initialization".into()),
    }
    Ok(out)
}

fn load_model(layout: &Layout) -> Result<(StoredModel, Network)> {
    require(&layout.model(), "model description", "train")?;
    require(&layout.checkpoint(), "checkpoint", "train")?;
    let text = crate::io_util::read_to_string(&layout.model())?;
    let stored: StoredModel = serde_json::from_str(&text).map_err(|e| Error::Format {
        path: layout.model(),
        reason: e.to_string(),
    })?;
    let params = checkpoint::load(&layout.checkpoint())?;
    let network = Network::new(stored.spec.clone(), params)?;
    Ok((stored, network))
}

const PREDICT_BATCH: usize = 64;

fn predict_labels(network: &Network, data: &crate::train::Dataset) -> Result<Vec<usize>> {
    let (_, _, labels) = crate::train::evaluate_loss(network, data, &[1.0; N_CLASSES], PREDICT_BATCH)?;
    Ok(labels)
}

/// Scores the trained model on the validation split.
pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let layout = Layout::new(cfg);
    let rows = load_prepared(&layout)?;
    let (stored, network) = load_model(&layout)?;
    check_mode(&rows, stored.mode)?;
    let val = dataset_for(&stored.spec, &rows_in(&rows, SplitTag::Val), &layout.data_dir, stored.image)?;
    let predicted = predict_labels(&network, &val)?;
    let report = evaluate_labels(val.labels(), &predicted, N_CLASSES)?;
    write_atomic(&layout.report(), serde_json::to_string_pretty(&report)?.as_bytes())?;

    let mut out = StageOutcome::default();
    out.lines.push(format!(
        "validation: accuracy {:.4}, weighted F1 {:.4}, macro F1 {:.4} over {} objects",
        report.accuracy,
        report.weighted_f1,
        report.macro_f1,
        val.len()
    ));
    if report.degenerate {
        out.warnings.push("validation split is empty; report is degenerate".into());
    }
    if layout.curves().is_file() {
        let history = parse_curves(&crate::io_util::read_to_string(&layout.curves())?)?;
        out.lines
            .push(format!("final train/val gap: {:+.4}", train_test_gap(&history).last));
    }
    out.artifacts.push(layout.report());
    Ok(out)
}

pub fn read_report(path: &Path) -> Result<EvalReport> {
    Ok(serde_json::from_str(&crate::io_util::read_to_string(path)?)?)
}

/// Classifies every object of a catalog CSV (the class column may be
/// blank) and writes `object_id,label,p_galaxy,p_qso,p_star`.
pub fn cmd_predict(cfg: &PipelineConfig, input: &Path, output: Option<&Path>) -> Result<StageOutcome> {
    let layout = Layout::new(cfg);
    let (stored, network) = load_model(&layout)?;
    require(&layout.scaler(), "scaler", "prepare")?;
    let scaler = ScalerState::load(&layout.scaler())?;
    let file = std::fs::File::open(input).map_err(|e| Error::io(input, e))?;
    let raw = parse_catalog(file)?;

    let mut ids = Vec::with_capacity(raw.len());
    let mut features = Vec::with_capacity(raw.len());
    let mut paths = Vec::with_capacity(raw.len());
    for r in &raw {
        let mut f = [0.0; crate::preprocess::N_FEATURES];
        for (k, v) in r.features.iter().enumerate() {
            f[k] = v.ok_or_else(|| Error::Data(format!("line {}: missing f{}", r.line, k + 1)))?;
        }
        crate::ingest::check_object_id(&r.object_id)?;
        ids.push(r.object_id.clone());
        features.push(scaler.transform_row(&f));
        paths.push(layout.data_dir.join(image_relpath(&r.object_id)));
    }

    let mut text = String::from("object_id,label,p_galaxy,p_qso,p_star\n");
    for start in (0..ids.len()).step_by(PREDICT_BATCH) {
        let end = (start + PREDICT_BATCH).min(ids.len());
        let pairs: Vec<_> = (start..end).map(|i| (&features[i], paths[i].as_path())).collect();
        let inputs = branch_inputs(&stored.spec, &pairs, stored.image)?;
        let pred = fusion::predict(&network, &inputs)?;
        for (j, &label) in pred.labels.iter().enumerate() {
            let p = pred.probabilities.row(j);
            text.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                ids[start + j],
                crate::preprocess::Class::from_code(label)?.name(),
                p[0],
                p[1],
                p[2]
            ));
        }
    }
    let target = output.map(Path::to_path_buf).unwrap_or_else(|| layout.predictions());
    write_atomic(&target, text.as_bytes())?;
    Ok(StageOutcome {
        lines: vec![format!("classified {} objects", ids.len())],
        warnings: Vec::new(),
        artifacts: vec![target],
    })
}

/// Fits the classical baselines and a tabular ANN on the prepared split
/// and ranks them by validation accuracy.
pub fn cmd_compare_baselines(cfg: &PipelineConfig) -> Result<StageOutcome> {
    let layout = Layout::new(cfg);
    let rows = load_prepared(&layout)?;
    let train_rows = rows_in(&rows, SplitTag::Train);
    let val_rows = rows_in(&rows, SplitTag::Val);
    let x_train: Vec<_> = train_rows.iter().map(|r| r.features).collect();
    let y_train: Vec<usize> = train_rows.iter().map(|r| r.class.code()).collect();
    let x_val: Vec<_> = val_rows.iter().map(|r| r.features).collect();
    let y_val: Vec<usize> = val_rows.iter().map(|r| r.class.code()).collect();
    let weights = crate::train::loss_weights(&y_train, N_CLASSES, cfg.train.class_weighting)?;

    let mut board = Vec::new();
    let mut score = |name: &str, predicted: Vec<usize>| -> Result<()> {
        let report = evaluate_labels(&y_val, &predicted, N_CLASSES)?;
        board.push(LeaderboardRow::from_report(name, &report));
        Ok(())
    };

    let ann_cfg = ModelConfig {
        mode: Mode::TabularOnly,
        ..cfg.model.clone()
    };
    let ann_spec = ann_cfg.build(cfg.data.image_side)?;
    let train_set = dataset_for(&ann_spec, &train_rows, &layout.data_dir, image_spec(cfg)?)?;
    let val_set = dataset_for(&ann_spec, &val_rows, &layout.data_dir, image_spec(cfg)?)?;
    let (ann, _) = train(Network::init(ann_spec, cfg.train.seed)?, &train_set, &val_set, &cfg.train)?;
    score("ann", predict_labels(&ann, &val_set)?)?;

    let logreg = logreg_fit(&x_train, &y_train, &weights, &cfg.baselines.logreg)?;
    score("logistic_regression", logreg_predict(&logreg, &x_val)?.0)?;
    let knn = knn_fit(&x_train, &y_train, cfg.baselines.knn_k)?;
    score("knn", knn_predict(&knn, &x_val)?)?;
    let gnb = gnb_fit(&x_train, &y_train, N_CLASSES)?;
    score("gaussian_nb", gnb_predict(&gnb, &x_val)?)?;

    let csv = leaderboard_csv(&board);
    write_atomic(&layout.leaderboard(), csv.as_bytes())?;
    Ok(StageOutcome {
        lines: csv.lines().map(str::to_string).collect(),
        warnings: Vec::new(),
        artifacts: vec![layout.leaderboard()],
    })
}
