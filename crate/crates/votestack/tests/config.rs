mod common;

use serde_json::json;
use votestack::config::{config_hash, parse_config};
use votestack::{load_config, Error, Overrides};

use common::{base_config, run_dir, small_models};

fn errors(e: Error) -> Vec<String> {
    match e {
        Error::Validation(v) => v,
        other => panic!("expected a validation error, got {other}"),
    }
}

#[test]
fn valid_config_resolves_relative_paths() {
    let run = run_dir(30, 0);
    run.write_config(&base_config(small_models(), &["cnn", "gru"]));
    let cfg = run.load();
    assert_eq!(cfg.config.dataset.path, run.path("data.tsv"));
    assert_eq!(cfg.config.output_dir, run.path("out"));
    assert_eq!(cfg.raw.embeddings, std::path::PathBuf::from("vectors.txt"));
    assert_eq!(cfg.hash.len(), 64);
    assert_eq!(cfg.train_config().seed, 7);
}

#[test]
fn every_problem_is_reported_with_its_field() {
    let run = run_dir(30, 0);
    let mut c = base_config(small_models(), &["cnn", "missing_member"]);
    c["embeddings"] = json!("no_such_vectors.txt");
    c["split_ratios"] = json!([0.5, 0.5, 0.5]);
    c["kfold"] = json!({"k": 1});
    c["train"]["epochs"] = json!(0);
    c["models"][1]["id"] = json!("cnn");
    run.write_config(&c);
    let msgs = errors(load_config(&run.config_path(), &Overrides::default()).unwrap_err());
    let joined = msgs.join("\n");
    for field in [
        "embeddings",
        "split_ratios",
        "kfold.k",
        "train",
        "models[1].id",
        "ensemble.members",
    ] {
        assert!(
            joined.contains(field),
            "no mention of `{field}` in:\n{joined}"
        );
    }
    assert!(msgs.len() >= 6, "{joined}");
}

#[test]
fn single_member_ensemble_is_rejected() {
    let run = run_dir(30, 0);
    run.write_config(&base_config(small_models(), &["cnn"]));
    let msgs = errors(load_config(&run.config_path(), &Overrides::default()).unwrap_err());
    assert!(
        msgs.iter().any(|m| m.starts_with("ensemble.members")),
        "{msgs:?}"
    );
}

#[test]
fn unknown_and_mistyped_fields_name_their_path() {
    let origin = std::path::Path::new("x.json");
    let e = parse_config(
        r#"{"dataset": {"path": "d.tsv"}, "embeddings": "v", "models": [], "sed": 1}"#,
        origin,
    )
    .unwrap_err();
    assert!(e.to_string().contains("sed"), "{e}");
    let e = parse_config(r#"{"dataset": {"path": "d.tsv"}, "embeddings": "v", "models": [], "train": {"epochs": "ten"}}"#, origin)
        .unwrap_err();
    assert!(e.to_string().contains("train.epochs"), "{e}");
    assert_eq!(e.exit_code(), 1);
}

#[test]
fn hash_tracks_content_not_location() {
    let run = run_dir(30, 0);
    run.write_config(&base_config(small_models(), &["cnn", "gru"]));
    let a = run.load();
    assert_eq!(config_hash(&a.config).unwrap(), a.hash);

    let mut moved = base_config(small_models(), &["cnn", "gru"]);
    moved["output_dir"] = json!("elsewhere");
    run.write_config(&moved);
    assert_eq!(run.load().hash, a.hash);

    let mut reseeded = base_config(small_models(), &["cnn", "gru"]);
    reseeded["seed"] = json!(8);
    run.write_config(&reseeded);
    assert_ne!(run.load().hash, a.hash);

    run.write_config(&base_config(small_models(), &["cnn", "gru"]));
    std::fs::write(run.path("vectors.txt"), "1 2\nx 0 0\n").unwrap();
    assert_ne!(run.load().hash, a.hash);
}

#[test]
fn command_line_overrides_win() {
    let run = run_dir(30, 0);
    run.write_config(&base_config(small_models(), &["cnn", "gru"]));
    let cfg = load_config(
        &run.config_path(),
        &Overrides {
            max_len: Some(5),
            seed: Some(99),
        },
    )
    .unwrap();
    assert_eq!(cfg.config.max_len, Some(5));
    assert_eq!(cfg.config.seed, 99);
}

#[test]
fn readme_example_parses() {
    let readme = common::read(&std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("../../README.md"));
    let block = readme
        .split("```json\n")
        .nth(1)
        .and_then(|rest| rest.split("```").next())
        .expect("README has a json block");
    let c = parse_config(block, std::path::Path::new("README.md")).unwrap();
    assert_eq!(c.models.len(), 4);
    assert_eq!(c.ensemble.unwrap().external.len(), 1);
}
