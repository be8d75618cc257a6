//! One function per pipeline stage. Each reads the run config, writes its
//! artifacts under `output_dir`, and returns a summary for the caller.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::json;
use votestack_core::corpus::{self, DatasetSplit};
use votestack_core::ensemble::{derive_priority, ensemble_predict, EnsembleConfig, VoteRecord};
use votestack_core::evalkit::{crossvalidate, evaluate, CrossValidation, CvError, CvOptions};
use votestack_core::models::{
    train_classifier, ExternalPredictions, ModelError, NeuralFoldTrainer, Prediction,
};
use votestack_core::{
    EncodedBatch, LabelSpace, LabeledBatch, LabeledExample, MetricsReport, Pipeline,
    TrainedClassifier,
};

use crate::config::LoadedConfig;
use crate::container::{load_model, save_model};
use crate::error::{Error, Result};
use crate::formats::{
    load_dataset, load_dictionary, load_embeddings, load_external_predictions, load_lexicon,
    read_predictions, render_predictions, write_file,
};
use crate::report::{class_table, metrics_table};

/// Dataset, split and encoding pipeline shared by every command.
pub struct Prepared {
    pub examples: Vec<LabeledExample>,
    pub label_space: LabelSpace,
    pub split: DatasetSplit,
    pub pipeline: Pipeline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Validation,
    Test,
}

impl SplitName {
    pub fn name(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Validation => "validation",
            SplitName::Test => "test",
        }
    }
}

impl Prepared {
    pub fn part(&self, which: SplitName) -> &[LabeledExample] {
        match which {
            SplitName::Train => &self.split.train,
            SplitName::Validation => &self.split.validation,
            SplitName::Test => &self.split.test,
        }
    }

    pub fn encode(&self, which: SplitName) -> Result<LabeledBatch> {
        self.pipeline
            .encode(self.part(which))
            .map_err(Error::runtime)
    }
}

fn data_error(e: impl std::fmt::Display) -> Error {
    Error::validation(e.to_string())
}

/// Loads the dataset, splits it, and builds the encoding pipeline. `max_len`
/// comes from the config or from the training texts.
pub fn prepare(cfg: &LoadedConfig) -> Result<Prepared> {
    let c = &cfg.config;
    let (examples, label_space) = load_dataset(&c.dataset.path, cfg.dataset_format())?;
    let split = corpus::stratified_split(&examples, c.split_ratios, c.seed, Some(&label_space))
        .map_err(data_error)?;
    let table = load_embeddings(&c.embeddings)?;
    let mut pipeline = Pipeline::new(c.preprocess, table, 1);
    if let Some(p) = &c.dictionary {
        pipeline = pipeline.with_dictionary(load_dictionary(p)?);
    }
    if let Some(p) = &c.lexicon {
        pipeline = pipeline.with_lexicon(load_lexicon(p)?);
    }
    pipeline.max_len = match c.max_len {
        Some(n) => n,
        None => {
            let texts: Vec<&str> = split.train.iter().map(|e| e.text.as_str()).collect();
            pipeline
                .suggest_max_len(&texts, c.max_len_percentile)
                .map_err(data_error)?
        }
    };
    let mut errors = Vec::new();
    for (i, m) in c.models.iter().enumerate() {
        if let Err(e) = m.spec.validate(pipeline.max_len) {
            errors.push(format!("models[{i}]: {e}"));
        }
    }
    if !errors.is_empty() {
        return Err(Error::Validation(errors));
    }
    Ok(Prepared {
        examples,
        label_space,
        split,
        pipeline,
    })
}

fn write_json(path: &Path, value: &impl Serialize) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(Error::runtime)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

pub fn model_path(cfg: &LoadedConfig, id: &str) -> PathBuf {
    cfg.output(&format!("models/{id}.vsm"))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PreprocessSummary {
    pub output: PathBuf,
    pub examples: usize,
    pub max_len: usize,
    pub oov_tokens: usize,
    pub tokens: usize,
}

/// Writes every example's tokens with its split and label.
pub fn cmd_preprocess(cfg: &LoadedConfig) -> Result<PreprocessSummary> {
    let prepared = prepare(cfg)?;
    let mut out = format!("# config {}\nid\tsplit\tlabel\ttokens\n", cfg.hash);
    let (mut tokens, mut oov) = (0, 0);
    let mut rows: Vec<(usize, &str, &LabeledExample)> = Vec::new();
    for which in [SplitName::Train, SplitName::Validation, SplitName::Test] {
        rows.extend(prepared.part(which).iter().map(|e| (e.id, which.name(), e)));
    }
    rows.sort_by_key(|r| r.0);
    for (id, split, e) in rows {
        let t = prepared.pipeline.preprocess(&e.text);
        tokens += t.len();
        oov += t
            .tokens()
            .iter()
            .filter(|w| !prepared.pipeline.table.contains(w))
            .count();
        out.push_str(&format!(
            "{id}\t{split}\t{}\t{}\n",
            prepared.label_space.name(e.label).unwrap_or_default(),
            t.tokens().join(" ")
        ));
    }
    let output = cfg.output("preprocessed.tsv");
    write_file(&output, out.as_bytes())?;
    Ok(PreprocessSummary {
        output,
        examples: prepared.examples.len(),
        max_len: prepared.pipeline.max_len,
        oov_tokens: oov,
        tokens,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainedModelSummary {
    pub id: String,
    pub kind: String,
    pub file: PathBuf,
    pub epochs_run: usize,
    pub best_validation_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TrainSummary {
    pub manifest: PathBuf,
    pub models: Vec<TrainedModelSummary>,
}

/// Trains every declared model, saves one container per model and a run
/// manifest with the config echo, fingerprint, split sizes and histories.
pub fn cmd_train(cfg: &LoadedConfig) -> Result<TrainSummary> {
    let prepared = prepare(cfg)?;
    let train = prepared.encode(SplitName::Train)?;
    let validation = prepared.encode(SplitName::Validation)?;
    let config = cfg.train_config();
    let mut models = Vec::new();
    let mut manifest_models = Vec::new();
    for entry in &cfg.config.models {
        let clf = train_classifier(
            &train,
            &validation,
            &entry.spec,
            &config,
            &prepared.pipeline.table,
            &prepared.label_space,
        )
        .map_err(|e| Error::runtime(format!("model `{}`: {e}", entry.id)))?;
        let file = model_path(cfg, &entry.id);
        save_model(&file, &clf, &cfg.hash)?;
        let best = clf
            .history()
            .iter()
            .map(|h| h.validation_score)
            .fold(f64::NEG_INFINITY, f64::max);
        manifest_models.push(json!({
            "id": entry.id,
            "kind": clf.kind().name(),
            "file": format!("models/{}.vsm", entry.id),
            "spec": entry.spec,
            "best_validation_score": best,
            "history": clf.history(),
        }));
        models.push(TrainedModelSummary {
            id: entry.id.clone(),
            kind: clf.kind().name().into(),
            file,
            epochs_run: clf.history().len(),
            best_validation_score: best,
        });
    }
    let manifest = json!({
        "config_hash": cfg.hash,
        "config": cfg.raw,
        "seed": cfg.config.seed,
        "split": {
            "ratios": cfg.config.split_ratios,
            "train": prepared.split.train.len(),
            "validation": prepared.split.validation.len(),
            "test": prepared.split.test.len(),
        },
        "label_space": prepared.label_space,
        "fingerprint": prepared.pipeline.fingerprint(),
        "models": manifest_models,
    });
    let path = cfg.output("manifest.json");
    write_json(&path, &manifest)?;
    Ok(TrainSummary {
        manifest: path,
        models,
    })
}

fn load_trained(cfg: &LoadedConfig, id: &str) -> Result<TrainedClassifier> {
    let path = model_path(cfg, id);
    if !path.is_file() {
        return Err(Error::validation(format!(
            "model `{id}`: {} not found; run `train` first",
            path.display()
        )));
    }
    Ok(load_model(&path)?.classifier)
}

fn check_label_space(id: &str, clf: &TrainedClassifier, space: &LabelSpace) -> Result<()> {
    if clf.label_space() != space {
        return Err(Error::validation(format!(
            "model `{id}` was trained on labels {:?}, dataset has {:?}",
            clf.label_space().labels(),
            space.labels()
        )));
    }
    Ok(())
}

fn predict(
    id: &str,
    clf: &TrainedClassifier,
    prepared: &Prepared,
    batch: &EncodedBatch,
) -> Result<Vec<Prediction>> {
    clf.predict(&prepared.pipeline.table, batch)
        .map_err(|e| match e {
            ModelError::FingerprintMismatch { .. } | ModelError::Coverage { .. } => {
                Error::validation(format!("model `{id}`: {e}"))
            }
            other => Error::runtime(format!("model `{id}`: {other}")),
        })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PredictSummary {
    pub output: PathBuf,
    pub examples: usize,
    pub report: MetricsReport,
}

/// Writes `predictions/<model>.<split>.tsv` for a trained model.
pub fn cmd_predict(cfg: &LoadedConfig, model: &str, split: SplitName) -> Result<PredictSummary> {
    if cfg.model(model).is_none() {
        return Err(Error::validation(format!(
            "--model: `{model}` is not declared in models"
        )));
    }
    let prepared = prepare(cfg)?;
    let clf = load_trained(cfg, model)?;
    check_label_space(model, &clf, &prepared.label_space)?;
    let data = prepared.encode(split)?;
    let preds = predict(model, &clf, &prepared, &data.batch)?;
    let output = cfg.output(&format!("predictions/{model}.{}.tsv", split.name()));
    write_file(
        &output,
        render_predictions(&cfg.hash, &data.batch.ids(), &preds, &prepared.label_space).as_bytes(),
    )?;
    let labels: Vec<usize> = preds.iter().map(|p| p.label).collect();
    let report = evaluate(&data.labels, &labels, &prepared.label_space).map_err(Error::runtime)?;
    Ok(PredictSummary {
        output,
        examples: labels.len(),
        report,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct AuditVote<'a> {
    member: &'a str,
    label: &'a str,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
struct AuditRecord<'a> {
    config_hash: &'a str,
    example_id: usize,
    /// in priority order
    votes: Vec<AuditVote<'a>>,
    tally: BTreeMap<&'a str, usize>,
    chosen: &'a str,
    resolution: votestack_core::Resolution,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MemberScore {
    pub id: String,
    pub kind: String,
    pub report: MetricsReport,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnsembleSummary {
    pub config_hash: String,
    pub metric: votestack_core::Metric,
    /// Members from best to worst validation score.
    pub priority: Vec<String>,
    pub members: Vec<MemberScore>,
    pub ensemble: MetricsReport,
    pub records: Vec<VoteRecord>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

/// Ranks the members on the validation split, votes on the test split and
/// writes predictions, reports, the ranked ensemble config and the vote audit.
pub fn cmd_ensemble(cfg: &LoadedConfig) -> Result<EnsembleSummary> {
    let section = cfg
        .config
        .ensemble
        .as_ref()
        .ok_or_else(|| Error::validation("ensemble: section missing from config"))?;
    let prepared = prepare(cfg)?;
    let space = &prepared.label_space;
    let validation = prepared.encode(SplitName::Validation)?;
    let test = prepared.encode(SplitName::Test)?;
    let mut expected: Vec<usize> = validation.batch.ids();
    expected.extend(test.batch.ids());
    expected.sort_unstable();

    let mut members = Vec::new();
    for id in &section.members {
        let clf = match section.external.get(id) {
            Some(path) => load_external_predictions(path, space, &expected)?,
            None => load_trained(cfg, id)?,
        };
        check_label_space(id, &clf, space)?;
        clf.check_fingerprint(&validation.batch.fingerprint)
            .map_err(|e| Error::validation(format!("model `{id}`: {e}")))?;
        members.push((id.clone(), clf));
    }
    let named: Vec<(&str, &TrainedClassifier)> =
        members.iter().map(|(id, c)| (id.as_str(), c)).collect();
    let ranked = derive_priority(
        &named,
        &prepared.pipeline.table,
        &validation,
        cfg.config.metric,
    )
    .map_err(Error::runtime)?;
    let ordered: Vec<&TrainedClassifier> = ranked
        .members()
        .iter()
        .map(|id| {
            &members
                .iter()
                .find(|(m, _)| m == id)
                .expect("ranked ids come from members")
                .1
        })
        .collect();
    let out = ensemble_predict(&ordered, &ranked, &prepared.pipeline.table, &test.batch)
        .map_err(Error::runtime)?;

    let member_reports: Vec<MemberScore> = ranked
        .members()
        .iter()
        .enumerate()
        .map(|(j, id)| {
            let labels: Vec<usize> = out.records.iter().map(|r| r.member_labels[j]).collect();
            Ok(MemberScore {
                id: id.clone(),
                kind: ordered[j].kind().name().into(),
                report: evaluate(&test.labels, &labels, space).map_err(Error::runtime)?,
            })
        })
        .collect::<Result<_>>()?;
    let ensemble_report = evaluate(&test.labels, &out.labels, space).map_err(Error::runtime)?;

    write_ensemble_artifacts(
        cfg,
        &ranked,
        space,
        &out.records,
        &member_reports,
        &ensemble_report,
    )?;
    Ok(EnsembleSummary {
        config_hash: cfg.hash.clone(),
        metric: cfg.config.metric,
        priority: ranked.members().to_vec(),
        members: member_reports,
        ensemble: ensemble_report,
        records: out.records,
        output_dir: cfg.output("ensemble"),
    })
}

fn write_ensemble_artifacts(
    cfg: &LoadedConfig,
    ranked: &EnsembleConfig,
    space: &LabelSpace,
    records: &[VoteRecord],
    members: &[MemberScore],
    ensemble: &MetricsReport,
) -> Result<()> {
    let name = |l: usize| space.name(l).unwrap_or_default();
    let m = ranked.len() as f64;

    let ids: Vec<usize> = records.iter().map(|r| r.example_id).collect();
    let preds: Vec<Prediction> = records
        .iter()
        .map(|r| Prediction {
            label: r.chosen,
            probabilities: (0..space.len())
                .map(|l| *r.tally.get(&l).unwrap_or(&0) as f64 / m)
                .collect(),
        })
        .collect();
    write_file(
        &cfg.output("ensemble/predictions.tsv"),
        render_predictions(&cfg.hash, &ids, &preds, space).as_bytes(),
    )?;

    let mut audit = String::new();
    for r in records {
        let rec = AuditRecord {
            config_hash: &cfg.hash,
            example_id: r.example_id,
            votes: ranked
                .members()
                .iter()
                .zip(&r.member_labels)
                .map(|(member, &l)| AuditVote {
                    member,
                    label: name(l),
                })
                .collect(),
            tally: r.tally.iter().map(|(&l, &c)| (name(l), c)).collect(),
            chosen: name(r.chosen),
            resolution: r.resolution,
        };
        audit.push_str(&serde_json::to_string(&rec).map_err(Error::runtime)?);
        audit.push('\n');
    }
    write_file(&cfg.output("ensemble/audit.jsonl"), audit.as_bytes())?;

    let per_label: BTreeMap<&str, BTreeMap<&str, f64>> = ranked
        .members()
        .iter()
        .zip(ranked.per_label_f1().unwrap_or_default())
        .map(|(id, row)| {
            (
                id.as_str(),
                row.iter().enumerate().map(|(l, &v)| (name(l), v)).collect(),
            )
        })
        .collect();
    write_json(
        &cfg.output("ensemble/ensemble_config.json"),
        &json!({ "config_hash": cfg.hash, "members": ranked.members(), "per_label_f1": per_label }),
    )?;

    write_json(
        &cfg.output("ensemble/report.json"),
        &json!({
            "config_hash": cfg.hash,
            "metric": cfg.config.metric,
            "split": "test",
            "priority": ranked.members(),
            "members": members,
            "ensemble": ensemble,
        }),
    )?;

    let mut rows: Vec<(String, &MetricsReport)> =
        members.iter().map(|s| (s.id.clone(), &s.report)).collect();
    rows.push(("ensemble".into(), ensemble));
    let text = format!(
        "# config {}\n\nTest split, {} examples\n\n{}\nEnsemble per class\n\n{}",
        cfg.hash,
        ensemble.total,
        metrics_table(&rows),
        class_table(ensemble)
    );
    write_file(&cfg.output("ensemble/report.txt"), text.as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KfoldModel {
    pub id: String,
    pub kind: String,
    pub result: CrossValidation,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KfoldSummary {
    pub config_hash: String,
    pub k: usize,
    pub stratify: bool,
    pub models: Vec<KfoldModel>,
    #[serde(skip)]
    pub output_dir: PathBuf,
}

/// Command-line replacements for the `kfold` section.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct KfoldOverrides {
    pub k: Option<usize>,
    pub no_stratify: bool,
}

/// Cross-validates each selected model over the whole dataset.
pub fn cmd_kfold(
    cfg: &LoadedConfig,
    only: Option<&str>,
    overrides: KfoldOverrides,
) -> Result<KfoldSummary> {
    let entries: Vec<_> = match only {
        Some(id) => vec![cfg.model(id).ok_or_else(|| {
            Error::validation(format!("--model: `{id}` is not declared in models"))
        })?],
        None => cfg.config.models.iter().collect(),
    };
    if entries.is_empty() {
        return Err(Error::validation("models: nothing to cross-validate"));
    }
    let mut kf = cfg.config.kfold.clone();
    if let Some(k) = overrides.k {
        if k < 2 {
            return Err(Error::validation(format!(
                "--k: must be at least 2, got {k}"
            )));
        }
        kf.k = k;
    }
    if overrides.no_stratify {
        kf.stratify = false;
    }
    let prepared = prepare(cfg)?;
    let options = CvOptions {
        k: kf.k,
        seed: cfg.config.seed,
        stratify: kf.stratify,
        metric: cfg.config.metric,
        validation_fraction: kf.validation_fraction,
    };
    let mut models = Vec::new();
    for entry in entries {
        let mut trainer = NeuralFoldTrainer {
            pipeline: &prepared.pipeline,
            spec: entry.spec.clone(),
            config: cfg.train_config(),
            label_space: prepared.label_space.clone(),
        };
        let result = crossvalidate(
            &prepared.examples,
            &prepared.label_space,
            &options,
            &mut trainer,
        )
        .map_err(|e| match e {
            CvError::Fold { .. } => Error::runtime(format!("model `{}`: {e}", entry.id)),
            other => Error::validation(format!("model `{}`: {other}", entry.id)),
        })?;
        models.push(KfoldModel {
            id: entry.id.clone(),
            kind: entry.spec.kind().name().into(),
            result,
        });
    }
    let summary = KfoldSummary {
        config_hash: cfg.hash.clone(),
        k: kf.k,
        stratify: kf.stratify,
        models,
        output_dir: cfg.output("kfold"),
    };
    write_json(&cfg.output("kfold/report.json"), &summary)?;
    write_file(
        &cfg.output("kfold/report.txt"),
        crate::report::kfold_table(&summary).as_bytes(),
    )?;
    Ok(summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvaluateSummary {
    pub split: SplitName,
    pub report: MetricsReport,
}

/// Scores a predictions file against the gold labels of `split`. The file
/// must carry the hash of the current config.
pub fn cmd_evaluate(
    cfg: &LoadedConfig,
    predictions: &Path,
    split: SplitName,
) -> Result<EvaluateSummary> {
    let file = read_predictions(predictions)?;
    match &file.config_hash {
        Some(h) if *h == cfg.hash => {}
        Some(h) => {
            return Err(Error::validation(format!(
                "{}: produced under config {h}, current config is {}",
                predictions.display(),
                cfg.hash
            )))
        }
        None => {
            return Err(Error::validation(format!(
                "{}: no `# config` line; cannot match it to this config",
                predictions.display()
            )))
        }
    }
    let prepared = prepare(cfg)?;
    let part = prepared.part(split);
    let ids: Vec<usize> = part.iter().map(|e| e.id).collect();
    let preds = ExternalPredictions::from_rows(file.rows, &prepared.label_space, &ids)
        .map_err(|e| Error::format(predictions, None, e))?;
    let clf = TrainedClassifier::external(preds, prepared.label_space.clone());
    let batch = prepared.encode(split)?;
    let labels = clf
        .predict_labels(&prepared.pipeline.table, &batch.batch)
        .map_err(Error::runtime)?;
    let report = evaluate(&batch.labels, &labels, &prepared.label_space).map_err(Error::runtime)?;
    Ok(EvaluateSummary { split, report })
}
