use std::path::Path;

use skyfusion::pipeline::{
    cmd_compare_baselines, cmd_evaluate, cmd_fetch, cmd_predict, cmd_prepare, cmd_train, read_report, Layout,
    PipelineConfig,
};
use skyfusion::ingest::DatasetManifest;
use skyfusion::preprocess::write_catalog;
use skyfusion::Error;

fn config(root: &Path, extra: &[&str]) -> PipelineConfig {
    let mut sets: Vec<String> = vec![
        format!("data.dir={}", root.join("data").display()),
        format!("output.dir={}", root.join("out").display()),
        "ingest.catalog_base_url=mock://catalog".into(),
        "ingest.cutout_base_url=mock://cutout".into(),
        "ingest.mock_objects=40".into(),
        "ingest.side=64".into(),
        "ingest.policy.politeness_ms=0".into(),
        "data.image_side=16".into(),
        "train.epochs=2".into(),
        "train.batch_size=8".into(),
    ];
    sets.extend(extra.iter().map(|s| s.to_string()));
    PipelineConfig::resolve(None, &sets).unwrap()
}

#[test]
fn stages_refuse_to_run_out_of_order() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(root.path(), &[]);
    for result in [cmd_prepare(&cfg), cmd_train(&cfg), cmd_compare_baselines(&cfg)] {
        let err = result.unwrap_err();
        assert!(matches!(err, Error::MissingArtifact { .. }), "{err}");
        assert!(err.to_string().contains("manifest not found"), "{err}");
    }
    cmd_fetch(&cfg).unwrap();
    let err = cmd_train(&cfg).unwrap_err().to_string();
    assert!(err.contains("prepare"), "{err}");
    cmd_prepare(&cfg).unwrap();
    let err = cmd_evaluate(&cfg).unwrap_err().to_string();
    assert!(err.contains("train"), "{err}");
}

#[test]
fn tabular_mode_runs_without_images_and_reports_everything() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(root.path(), &["model.mode=\"tabular-only\"", "train.epochs=5"]);
    cmd_fetch(&cfg).unwrap();
    cmd_prepare(&cfg).unwrap();
    cmd_train(&cfg).unwrap();
    cmd_evaluate(&cfg).unwrap();
    let layout = Layout::new(&cfg);
    let report = read_report(&layout.report()).unwrap();
    assert_eq!(report.confusion_matrix.len(), 3);
    assert_eq!(report.per_class_f1.len(), 3);
    assert!((report.weighted_recall - report.accuracy).abs() < 1e-12);
    let n: u64 = report.support.iter().sum();
    assert_eq!(n, 12);

    let board = cmd_compare_baselines(&cfg).unwrap();
    let text = std::fs::read_to_string(layout.leaderboard()).unwrap();
    for model in ["ann", "logistic_regression", "knn", "gaussian_nb"] {
        assert!(text.contains(&format!("\n{model},")), "{text}");
    }
    assert_eq!(board.lines.len(), 5);
}

#[test]
fn predict_decodes_class_names() {
    let root = tempfile::tempdir().unwrap();
    let cfg = config(root.path(), &[]);
    cmd_fetch(&cfg).unwrap();
    cmd_prepare(&cfg).unwrap();
    cmd_train(&cfg).unwrap();

    // Re-use the fetched objects as an unlabeled catalog.
    let manifest = DatasetManifest::load(&root.path().join("data/manifest.csv")).unwrap();
    let records: Vec<_> = manifest.rows.iter().take(7).map(|r| r.record().unwrap()).collect();
    let labelled = write_catalog(&records).unwrap();
    let mut input = String::new();
    for (i, line) in labelled.lines().enumerate() {
        let mut cells: Vec<&str> = line.split(',').collect();
        if i > 0 {
            *cells.last_mut().unwrap() = "";
        }
        input.push_str(&cells.join(","));
        input.push('\n');
    }
    let input_path = root.path().join("unlabeled.csv");
    std::fs::write(&input_path, input).unwrap();
    let out = root.path().join("pred.csv");
    cmd_predict(&cfg, &input_path, Some(&out)).unwrap();
    let text = std::fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("object_id,label,p_galaxy,p_qso,p_star"));
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 7);
    for row in rows {
        let cells: Vec<&str> = row.split(',').collect();
        assert!(["GALAXY", "QSO", "STAR"].contains(&cells[1]), "{row}");
        let total: f64 = cells[2..].iter().map(|c| c.parse::<f64>().unwrap()).sum();
        assert!((total - 1.0).abs() < 1e-5);
    }
}

#[test]
fn whole_pipeline_is_byte_reproducible() {
    let run = |root: &Path| {
        let cfg = config(root, &[]);
        cmd_fetch(&cfg).unwrap();
        cmd_prepare(&cfg).unwrap();
        cmd_train(&cfg).unwrap();
        cmd_evaluate(&cfg).unwrap();
        ["data/manifest.csv", "data/standardized.csv", "out/checkpoint.bin", "out/curves.csv", "out/report.json"]
            .map(|p| std::fs::read(root.join(p)).unwrap())
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let (ra, rb) = (run(a.path()), run(b.path()));
    assert!(ra == rb);
}

#[test]
fn config_rejects_unknown_keys() {
    let err = PipelineConfig::resolve(None, &["train.epoch=3".to_string()]).unwrap_err();
    assert!(err.to_string().contains("train.epoch"), "{err}");
}
