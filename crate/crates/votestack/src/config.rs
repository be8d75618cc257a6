//! JSON run configuration.
//!
//! Relative paths resolve against the directory holding the config file.
//! `VOTESTACK_SEED`, when set, replaces `seed`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use votestack_core::evalkit::Metric;
use votestack_core::{ModelSpec, PreprocessOptions, TrainConfig};

use crate::error::{Error, Result};
use crate::formats::DatasetFormat;

pub const SEED_ENV: &str = "VOTESTACK_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub path: PathBuf,
    /// Inferred from the file extension when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub format: Option<DatasetFormat>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub id: String,
    #[serde(flatten)]
    pub spec: ModelSpec,
}

/// Training hyperparameters; the seed comes from the top-level `seed`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainSettings {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub early_stop_patience: usize,
    pub validation_metric: Metric,
}

impl Default for TrainSettings {
    fn default() -> Self {
        let d = TrainConfig::default();
        TrainSettings {
            epochs: d.epochs,
            batch_size: d.batch_size,
            lr: d.lr,
            early_stop_patience: d.early_stop_patience,
            validation_metric: d.validation_metric,
        }
    }
}

impl TrainSettings {
    pub fn with_seed(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.lr,
            seed,
            early_stop_patience: self.early_stop_patience,
            validation_metric: self.validation_metric,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EnsembleSection {
    /// Ids of declared models or keys of `external`.
    pub members: Vec<String>,
    /// External member id → predictions TSV.
    #[serde(default)]
    pub external: BTreeMap<String, PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct KfoldSection {
    pub k: usize,
    pub stratify: bool,
    pub validation_fraction: f64,
}

impl Default for KfoldSection {
    fn default() -> Self {
        KfoldSection {
            k: 5,
            stratify: true,
            validation_fraction: 0.1,
        }
    }
}

fn default_ratios() -> [f64; 3] {
    [0.8, 0.1, 0.1]
}

fn default_percentile() -> f64 {
    0.95
}

fn default_output() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: DatasetConfig,
    /// train / validation / test fractions
    #[serde(default = "default_ratios")]
    pub split_ratios: [f64; 3],
    #[serde(default)]
    pub preprocess: PreprocessOptions,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dictionary: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lexicon: Option<PathBuf>,
    pub embeddings: PathBuf,
    /// Fixed sequence length; when absent it is derived from the training
    /// texts at `max_len_percentile`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_len: Option<usize>,
    #[serde(default = "default_percentile")]
    pub max_len_percentile: f64,
    pub models: Vec<ModelEntry>,
    #[serde(default)]
    pub train: TrainSettings,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ensemble: Option<EnsembleSection>,
    #[serde(default)]
    pub metric: Metric,
    #[serde(default)]
    pub kfold: KfoldSection,
    #[serde(default = "default_output")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
}

/// Command-line adjustments applied before validation and hashing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub max_len: Option<usize>,
    pub seed: Option<u64>,
}

/// A validated config with paths resolved and its content hash.
#[derive(Debug, Clone, PartialEq)]
pub struct LoadedConfig {
    pub config: RunConfig,
    /// Config as written (after overrides), echoed into manifests.
    pub raw: RunConfig,
    pub hash: String,
    pub source: PathBuf,
}

impl LoadedConfig {
    pub fn dataset_format(&self) -> DatasetFormat {
        self.config
            .dataset
            .format
            .unwrap_or_else(|| DatasetFormat::from_path(&self.config.dataset.path))
    }

    pub fn train_config(&self) -> TrainConfig {
        self.config.train.with_seed(self.config.seed)
    }

    pub fn model(&self, id: &str) -> Option<&ModelEntry> {
        self.config.models.iter().find(|m| m.id == id)
    }

    pub fn output(&self, relative: &str) -> PathBuf {
        self.config.output_dir.join(relative)
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v.trim().parse().map(Some).map_err(|_| {
            Error::validation(format!("{SEED_ENV}: `{v}` is not a non-negative integer"))
        }),
        Err(_) => Ok(None),
    }
}

pub fn parse_config(text: &str, origin: &Path) -> Result<RunConfig> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let field = if path == "." {
            String::new()
        } else {
            format!("{path}: ")
        };
        Error::validation(format!("{}: {field}{}", origin.display(), e.inner()))
    })
}

pub fn load_config(path: &Path, overrides: &Overrides) -> Result<LoadedConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::validation(format!("{}: cannot read config: {e}", path.display())))?;
    let mut raw = parse_config(&text, path)?;
    if let Some(seed) = env_seed()? {
        raw.seed = seed;
    }
    if let Some(seed) = overrides.seed {
        raw.seed = seed;
    }
    if overrides.max_len.is_some() {
        raw.max_len = overrides.max_len;
    }
    let base = path.parent().map(Path::to_path_buf).unwrap_or_default();
    let mut config = raw.clone();
    config.dataset.path = resolve(&base, &config.dataset.path);
    config.embeddings = resolve(&base, &config.embeddings);
    config.dictionary = config.dictionary.map(|p| resolve(&base, &p));
    config.lexicon = config.lexicon.map(|p| resolve(&base, &p));
    config.output_dir = resolve(&base, &config.output_dir);
    if let Some(e) = &mut config.ensemble {
        for p in e.external.values_mut() {
            *p = resolve(&base, p);
        }
    }
    validate(&config)?;
    let hash = config_hash(&config)?;
    Ok(LoadedConfig {
        config,
        raw,
        hash,
        source: path.to_path_buf(),
    })
}

/// Collects every problem before failing; messages start with the field path.
pub fn validate(c: &RunConfig) -> Result<()> {
    let mut errors = Vec::new();
    let mut need_file = |field: &str, p: &Path| {
        if !p.is_file() {
            errors.push(format!("{field}: file not found: {}", p.display()));
        }
    };
    need_file("dataset.path", &c.dataset.path);
    need_file("embeddings", &c.embeddings);
    if let Some(p) = &c.dictionary {
        need_file("dictionary", p);
    }
    if let Some(p) = &c.lexicon {
        need_file("lexicon", p);
    }
    if let Some(e) = &c.ensemble {
        for (id, p) in &e.external {
            need_file(&format!("ensemble.external.{id}"), p);
        }
    }

    if c.split_ratios.iter().any(|r| !r.is_finite() || *r <= 0.0)
        || (c.split_ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9
    {
        errors.push(format!(
            "split_ratios: fractions must be positive and sum to 1, got {:?}",
            c.split_ratios
        ));
    }
    if c.max_len == Some(0) {
        errors.push("max_len: must be at least 1".into());
    }
    if !(c.max_len_percentile > 0.0 && c.max_len_percentile <= 1.0) {
        errors.push(format!(
            "max_len_percentile: must be in (0, 1], got {}",
            c.max_len_percentile
        ));
    }
    if c.models.is_empty() && c.ensemble.as_ref().is_none_or(|e| e.external.is_empty()) {
        errors.push("models: at least one model is required".into());
    }
    let mut ids: Vec<&str> = Vec::new();
    for (i, m) in c.models.iter().enumerate() {
        if m.id.trim().is_empty() || m.id.contains(['/', '\\']) {
            errors.push(format!(
                "models[{i}].id: `{}` is not a usable file name",
                m.id
            ));
        }
        if ids.contains(&m.id.as_str()) {
            errors.push(format!("models[{i}].id: duplicate id `{}`", m.id));
        }
        ids.push(&m.id);
        // widths are checked against max_len once it is known
        if let Err(e) = m.spec.validate(c.max_len.unwrap_or(usize::MAX)) {
            errors.push(format!("models[{i}]: {e}"));
        }
    }
    if let Err(e) = c.train.with_seed(c.seed).validate() {
        errors.push(format!("train: {e}"));
    }
    if let Some(e) = &c.ensemble {
        if e.members.len() < 2 {
            errors.push(format!(
                "ensemble.members: voting needs at least 2 members, got {}",
                e.members.len()
            ));
        }
        for (i, m) in e.members.iter().enumerate() {
            if e.members[..i].contains(m) {
                errors.push(format!("ensemble.members[{i}]: duplicate member `{m}`"));
            }
            let declared = ids.contains(&m.as_str());
            let external = e.external.contains_key(m);
            if declared && external {
                errors.push(format!(
                    "ensemble.members[{i}]: `{m}` is both a model and an external file"
                ));
            } else if !declared && !external {
                errors.push(format!(
                    "ensemble.members[{i}]: `{m}` is neither a declared model nor an external file"
                ));
            }
        }
    }
    if c.kfold.k < 2 {
        errors.push(format!("kfold.k: must be at least 2, got {}", c.kfold.k));
    }
    if !(c.kfold.validation_fraction > 0.0 && c.kfold.validation_fraction < 1.0) {
        errors.push(format!(
            "kfold.validation_fraction: must be in (0, 1), got {}",
            c.kfold.validation_fraction
        ));
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(Error::Validation(errors))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

fn file_hash(p: &Path) -> Result<PathBuf> {
    let bytes = std::fs::read(p).map_err(|e| Error::io(p, e))?;
    Ok(PathBuf::from(format!("sha256:{}", sha256_hex(&bytes))))
}

/// Hash of the settings with every input path replaced by the hash of the
/// file's contents and the output directory left out, so moving a run does
/// not change it but editing an input does.
pub fn config_hash(c: &RunConfig) -> Result<String> {
    let mut h = c.clone();
    h.dataset.path = file_hash(&c.dataset.path)?;
    h.dataset.format = Some(
        h.dataset
            .format
            .unwrap_or_else(|| DatasetFormat::from_path(&c.dataset.path)),
    );
    h.embeddings = file_hash(&c.embeddings)?;
    h.dictionary = c.dictionary.as_deref().map(file_hash).transpose()?;
    h.lexicon = c.lexicon.as_deref().map(file_hash).transpose()?;
    h.output_dir = PathBuf::new();
    if let Some(e) = &mut h.ensemble {
        for p in e.external.values_mut() {
            *p = file_hash(p)?;
        }
    }
    let value = serde_json::to_value(&h).map_err(Error::runtime)?;
    Ok(sha256_hex(value.to_string().as_bytes()))
}
