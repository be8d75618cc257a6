mod common;

use serde_json::{json, Value};
use votestack::commands::{
    cmd_ensemble, cmd_evaluate, cmd_kfold, cmd_predict, cmd_preprocess, cmd_train, KfoldOverrides,
    SplitName,
};
use votestack::container::load_model;
use votestack::Error;

use common::{base_config, read, run_dir, small_models};

fn two_models() -> Value {
    let all = small_models();
    json!([all[0], all[3]])
}

#[test]
fn train_writes_one_model_per_spec_and_a_manifest() {
    let run = run_dir(150, 1);
    run.write_config(&base_config(two_models(), &["cnn", "gru"]));
    let cfg = run.load();
    let summary = cmd_train(&cfg).unwrap();
    assert_eq!(summary.models.len(), 2);
    for m in &summary.models {
        let loaded = load_model(&m.file).unwrap();
        assert_eq!(loaded.config_hash, cfg.hash);
        assert_eq!(loaded.classifier.kind().name(), m.kind);
    }
    let manifest: Value = serde_json::from_str(&read(&summary.manifest)).unwrap();
    assert_eq!(manifest["config_hash"], json!(cfg.hash));
    assert_eq!(manifest["config"]["embeddings"], json!("vectors.txt"));
    assert_eq!(manifest["split"]["train"], json!(90));
    assert_eq!(manifest["models"][1]["kind"], json!("gru"));
    assert!(!manifest["models"][0]["history"]
        .as_array()
        .unwrap()
        .is_empty());
    assert!(manifest["fingerprint"].is_object());

    let first = read(&summary.manifest);
    cmd_train(&cfg).unwrap();
    assert_eq!(read(&summary.manifest), first);
}

#[test]
fn missing_embeddings_name_the_field() {
    let run = run_dir(30, 1);
    let mut c = base_config(two_models(), &["cnn", "gru"]);
    c["embeddings"] = json!("gone.txt");
    run.write_config(&c);
    let e = votestack::load_config(&run.config_path(), &Default::default()).unwrap_err();
    assert_eq!(e.exit_code(), 1);
    assert!(e.to_string().starts_with("embeddings"), "{e}");
}

#[test]
fn preprocess_predict_ensemble_evaluate() {
    let run = run_dir(150, 2);
    let models = small_models();
    run.write_config(&base_config(
        json!([models[0], models[1], models[3]]),
        &["cnn", "lstm", "gru"],
    ));
    let cfg = run.load();

    let pre = cmd_preprocess(&cfg).unwrap();
    assert_eq!(pre.examples, 150);
    let text = read(&pre.output);
    assert!(text.starts_with(&format!("# config {}\n", cfg.hash)));
    assert_eq!(text.lines().count(), 152);

    // models must exist before predicting
    assert!(matches!(
        cmd_predict(&cfg, "cnn", SplitName::Test),
        Err(Error::Validation(_))
    ));
    cmd_train(&cfg).unwrap();
    assert!(matches!(
        cmd_predict(&cfg, "nope", SplitName::Test),
        Err(Error::Validation(_))
    ));
    let pred = cmd_predict(&cfg, "cnn", SplitName::Test).unwrap();
    assert_eq!(pred.examples, 42);
    let scored = cmd_evaluate(&cfg, &pred.output, SplitName::Test).unwrap();
    assert_eq!(scored.report, pred.report);
    // a test-split file does not cover the validation split
    assert!(cmd_evaluate(&cfg, &pred.output, SplitName::Validation).is_err());

    let ens = cmd_ensemble(&cfg).unwrap();
    assert_eq!(ens.priority.len(), 3);
    assert_eq!(ens.records.len(), 42);
    let dir = cfg.output("ensemble");
    let report = read(&dir.join("report.txt"));
    for needle in [
        "macro_f1",
        "micro_f1",
        "weighted_f1",
        "precision",
        "support",
        "C0",
    ] {
        assert!(report.contains(needle), "{needle} missing from\n{report}");
    }
    let audit = read(&dir.join("audit.jsonl"));
    assert_eq!(audit.lines().count(), 42);
    let first: Value = serde_json::from_str(audit.lines().next().unwrap()).unwrap();
    assert_eq!(first["config_hash"], json!(cfg.hash));
    assert_eq!(first["votes"].as_array().unwrap().len(), 3);
    let ens_config: Value = serde_json::from_str(&read(&dir.join("ensemble_config.json"))).unwrap();
    assert_eq!(ens_config["members"], json!(ens.priority));
    let scored = cmd_evaluate(&cfg, &dir.join("predictions.tsv"), SplitName::Test).unwrap();
    assert_eq!(scored.report, ens.ensemble);
    // vote fractions
    let line = read(&dir.join("predictions.tsv"))
        .lines()
        .nth(1)
        .unwrap()
        .to_string();
    let fractions: f64 = line
        .split('\t')
        .skip(2)
        .map(|v| v.parse::<f64>().unwrap())
        .sum();
    assert!((fractions - 1.0).abs() < 1e-12);
}

#[test]
fn evaluate_refuses_other_configs() {
    let run = run_dir(60, 3);
    run.write_config(&base_config(two_models(), &["cnn", "gru"]));
    let cfg = run.load();
    cmd_train(&cfg).unwrap();
    let pred = cmd_predict(&cfg, "cnn", SplitName::Test).unwrap();

    let mut other = base_config(two_models(), &["cnn", "gru"]);
    other["seed"] = json!(8);
    run.write_config(&other);
    let e = cmd_evaluate(&run.load(), &pred.output, SplitName::Test).unwrap_err();
    assert!(e.to_string().contains("produced under config"), "{e}");
    assert_eq!(e.exit_code(), 1);

    let stripped = run.path("stripped.tsv");
    let body: String = read(&pred.output)
        .lines()
        .skip(1)
        .map(|l| format!("{l}\n"))
        .collect();
    std::fs::write(&stripped, body).unwrap();
    assert!(cmd_evaluate(&cfg, &stripped, SplitName::Test).is_err());
}

#[test]
fn ensemble_refuses_models_from_another_encoding() {
    let run = run_dir(60, 3);
    run.write_config(&base_config(two_models(), &["cnn", "gru"]));
    cmd_train(&run.load()).unwrap();
    let mut c = base_config(two_models(), &["cnn", "gru"]);
    c["preprocess"] = json!({"lowercase": false});
    run.write_config(&c);
    let e = cmd_ensemble(&run.load()).unwrap_err();
    assert!(e.to_string().contains("fingerprint mismatch"), "{e}");
}

#[test]
fn kfold_reports_every_fold_and_is_deterministic() {
    let run = run_dir(100, 4);
    let mut c = base_config(two_models(), &["cnn", "gru"]);
    c["train"]["epochs"] = json!(3);
    run.write_config(&c);
    let cfg = run.load();
    let a = cmd_kfold(&cfg, Some("cnn"), KfoldOverrides::default()).unwrap();
    assert_eq!(a.models.len(), 1);
    assert_eq!(a.models[0].result.fold_scores.len(), 5);
    let text = read(&cfg.output("kfold/report.txt"));
    assert!(text.contains("mean") && text.contains('±'), "{text}");
    let b = cmd_kfold(&cfg, Some("cnn"), KfoldOverrides::default()).unwrap();
    assert_eq!(
        a.models[0].result.fold_scores,
        b.models[0].result.fold_scores
    );

    let three = cmd_kfold(
        &cfg,
        Some("cnn"),
        KfoldOverrides {
            k: Some(3),
            no_stratify: true,
        },
    )
    .unwrap();
    assert_eq!((three.k, three.stratify), (3, false));
    assert_eq!(three.models[0].result.fold_scores.len(), 3);
    let one = cmd_kfold(
        &cfg,
        None,
        KfoldOverrides {
            k: Some(1),
            no_stratify: false,
        },
    )
    .unwrap_err();
    assert_eq!(one.exit_code(), 1);
}
