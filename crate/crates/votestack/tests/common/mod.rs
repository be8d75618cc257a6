#![allow(dead_code)]

use std::path::{Path, PathBuf};

use serde_json::{json, Value};
use votestack::formats::{write_dataset_tsv, write_embeddings};
use votestack::{load_config, LoadedConfig, Overrides};
use votestack_core::synthetic::{keyword_corpus, KeywordCorpus, KeywordCorpusOptions};

pub struct RunDir {
    pub dir: tempfile::TempDir,
    pub corpus: KeywordCorpus,
}

impl RunDir {
    pub fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    pub fn config_path(&self) -> PathBuf {
        self.path("run.json")
    }

    pub fn write_config(&self, config: &Value) -> PathBuf {
        let p = self.config_path();
        std::fs::write(&p, serde_json::to_string_pretty(config).unwrap()).unwrap();
        p
    }

    pub fn load(&self) -> LoadedConfig {
        load_config(&self.config_path(), &Overrides::default()).unwrap()
    }
}

/// Keyword corpus plus embeddings on disk.
pub fn run_dir(examples: usize, seed: u64) -> RunDir {
    let dir = tempfile::tempdir().unwrap();
    let corpus = keyword_corpus(&KeywordCorpusOptions {
        examples,
        seed,
        ..Default::default()
    });
    write_dataset_tsv(
        &dir.path().join("data.tsv"),
        &corpus.examples,
        &corpus.label_space,
    )
    .unwrap();
    write_embeddings(&dir.path().join("vectors.txt"), &corpus.embeddings).unwrap();
    RunDir { dir, corpus }
}

pub fn small_models() -> Value {
    json!([
        {"id": "cnn", "family": "cnn", "base_width": 1, "filters_per_width": 16, "dropout": 0.25},
        {"id": "lstm", "family": "rnn", "cell": "lstm", "hidden_size": 16, "dropout": 0.25},
        {"id": "bilstm", "family": "rnn", "cell": "lstm", "bidirectional": true, "hidden_size": 16, "dropout": 0.25},
        {"id": "gru", "family": "rnn", "cell": "gru", "hidden_size": 16, "dropout": 0.25}
    ])
}

pub fn base_config(models: Value, members: &[&str]) -> Value {
    json!({
        "dataset": {"path": "data.tsv"},
        "embeddings": "vectors.txt",
        "split_ratios": [0.6, 0.12, 0.28],
        "max_len": 8,
        "models": models,
        "train": {"epochs": 20, "batch_size": 16, "lr": 0.01, "early_stop_patience": 4},
        "ensemble": {"members": members},
        "metric": "weighted_f1",
        "output_dir": "out",
        "seed": 7
    })
}

pub fn read(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap_or_else(|e| panic!("{}: {e}", path.display()))
}
