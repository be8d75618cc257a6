//! The four from-scratch classifiers (CNN, LSTM, BiLSTM, GRU), the
//! external-predictions adapter, and training with early stopping.

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::LabelSpace;
use crate::embed::{EmbedError, EmbeddingTable};
use crate::evalkit::{EvalError, Metric};
use crate::nnkernel::{KernelError, Tensor};
use crate::pipeline::{EncodedBatch, Fingerprint};

mod network;
mod train;

pub use network::Network;
pub use train::{train_classifier, NeuralFoldTrainer};

/// Any batch whose mean cross-entropy exceeds this many nats counts as diverged.
pub const DIVERGENCE_LOSS: f64 = 1e4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ModelError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("training diverged in epoch {epoch} (loss {loss})")]
    Divergence { epoch: usize, loss: f64 },
    #[error("fingerprint mismatch: model expects {expected}, input was encoded under {found}")]
    FingerprintMismatch {
        expected: Box<Fingerprint>,
        found: Box<Fingerprint>,
    },
    #[error("external predictions do not cover the expected ids (missing {missing:?}, duplicate {duplicate:?}, unexpected {unexpected:?})")]
    Coverage {
        missing: Vec<usize>,
        duplicate: Vec<usize>,
        unexpected: Vec<usize>,
    },
    #[error("format error: {0}")]
    Format(String),
    #[error(transparent)]
    Kernel(#[from] KernelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
}

/// Parallel convolution blocks; block `i` uses filter width `base_width + i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CnnConfig {
    pub conv_blocks: usize,
    pub base_width: usize,
    pub filters_per_width: usize,
    pub dropout: f64,
}

impl Default for CnnConfig {
    /// Three blocks with widths {2, 3, 4}.
    fn default() -> Self {
        CnnConfig {
            conv_blocks: 3,
            base_width: 2,
            filters_per_width: 128,
            dropout: 0.5,
        }
    }
}

impl CnnConfig {
    /// Five blocks with widths {1, ..., 5}.
    pub fn five_blocks() -> Self {
        CnnConfig {
            conv_blocks: 5,
            base_width: 1,
            ..Self::default()
        }
    }

    pub fn widths(&self) -> Vec<usize> {
        (0..self.conv_blocks).map(|i| self.base_width + i).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CellKind {
    Lstm,
    Gru,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RnnConfig {
    pub cell: CellKind,
    #[serde(default = "default_hidden")]
    pub hidden_size: usize,
    #[serde(default)]
    pub bidirectional: bool,
    #[serde(default = "default_dropout")]
    pub dropout: f64,
}

fn default_hidden() -> usize {
    128
}

fn default_dropout() -> f64 {
    0.5
}

impl RnnConfig {
    pub fn lstm(hidden_size: usize) -> Self {
        RnnConfig {
            cell: CellKind::Lstm,
            hidden_size,
            bidirectional: false,
            dropout: 0.5,
        }
    }

    pub fn bilstm(hidden_size: usize) -> Self {
        RnnConfig {
            bidirectional: true,
            ..Self::lstm(hidden_size)
        }
    }

    pub fn gru(hidden_size: usize) -> Self {
        RnnConfig {
            cell: CellKind::Gru,
            ..Self::lstm(hidden_size)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelSpec {
    Cnn(CnnConfig),
    Rnn(RnnConfig),
}

impl ModelSpec {
    pub fn kind(&self) -> ModelKind {
        match self {
            ModelSpec::Cnn(_) => ModelKind::Cnn,
            ModelSpec::Rnn(r) => match (r.cell, r.bidirectional) {
                (CellKind::Lstm, false) => ModelKind::Lstm,
                (CellKind::Lstm, true) => ModelKind::Bilstm,
                (CellKind::Gru, _) => ModelKind::Gru,
            },
        }
    }

    pub fn dropout(&self) -> f64 {
        match self {
            ModelSpec::Cnn(c) => c.dropout,
            ModelSpec::Rnn(r) => r.dropout,
        }
    }

    /// Checks the spec against the sequence length it will be trained on.
    pub fn validate(&self, max_len: usize) -> Result<(), ModelError> {
        let dropout = self.dropout();
        if !(0.0..1.0).contains(&dropout) {
            return Err(ModelError::Config(alloc::format!(
                "dropout must be in [0, 1), got {dropout}"
            )));
        }
        match self {
            ModelSpec::Cnn(c) => {
                if c.conv_blocks == 0 || c.base_width == 0 || c.filters_per_width == 0 {
                    return Err(ModelError::Config(
                        "conv_blocks, base_width and filters_per_width must be at least 1".into(),
                    ));
                }
                if let Some(w) = c.widths().into_iter().find(|&w| w > max_len) {
                    return Err(ModelError::Config(alloc::format!(
                        "filter width {w} exceeds max_len {max_len}"
                    )));
                }
            }
            ModelSpec::Rnn(r) => {
                if r.hidden_size == 0 {
                    return Err(ModelError::Config("hidden_size must be at least 1".into()));
                }
                if r.bidirectional && r.cell == CellKind::Gru {
                    return Err(ModelError::Config(
                        "bidirectional GRU is not a supported model".into(),
                    ));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Cnn,
    Lstm,
    Bilstm,
    Gru,
    External,
}

impl ModelKind {
    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Cnn => "cnn",
            ModelKind::Lstm => "lstm",
            ModelKind::Bilstm => "bilstm",
            ModelKind::Gru => "gru",
            ModelKind::External => "external",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
    pub early_stop_patience: usize,
    pub validation_metric: Metric,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 20,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
            early_stop_patience: 3,
            validation_metric: Metric::WeightedF1,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.epochs == 0 || self.batch_size == 0 {
            return Err(ModelError::Config(
                "epochs and batch_size must be at least 1".into(),
            ));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return Err(ModelError::Config(alloc::format!(
                "lr must be positive, got {}",
                self.lr
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub label: usize,
    pub probabilities: Vec<f64>,
}

/// Precomputed predictions keyed by example id.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExternalPredictions {
    by_id: BTreeMap<usize, Prediction>,
}

/// One parsed row of an external predictions file.
#[derive(Debug, Clone, PartialEq)]
pub struct ExternalRow {
    pub line: usize,
    pub id: usize,
    pub label: String,
    pub probabilities: Option<Vec<f64>>,
}

impl ExternalPredictions {
    /// Requires the rows to cover `expected_ids` exactly once each. Rows
    /// without probabilities get a one-hot vector on their label.
    pub fn from_rows(
        rows: Vec<ExternalRow>,
        label_space: &LabelSpace,
        expected_ids: &[usize],
    ) -> Result<Self, ModelError> {
        let k = label_space.len();
        let expected: BTreeSet<usize> = expected_ids.iter().copied().collect();
        let mut by_id = BTreeMap::new();
        let mut duplicate = BTreeSet::new();
        let mut unexpected = BTreeSet::new();
        for row in rows {
            let label = label_space.index_of(&row.label).ok_or_else(|| {
                ModelError::Format(alloc::format!(
                    "line {}: unknown label `{}`",
                    row.line,
                    row.label
                ))
            })?;
            let probabilities = match row.probabilities {
                Some(p) => {
                    if p.len() != k || p.iter().any(|v| !v.is_finite() || *v < 0.0) {
                        return Err(ModelError::Format(alloc::format!(
                            "line {}: expected {k} non-negative probabilities, got {:?}",
                            row.line,
                            p
                        )));
                    }
                    p
                }
                None => {
                    let mut p = alloc::vec![0.0; k];
                    p[label] = 1.0;
                    p
                }
            };
            if !expected.contains(&row.id) {
                unexpected.insert(row.id);
            }
            if by_id
                .insert(
                    row.id,
                    Prediction {
                        label,
                        probabilities,
                    },
                )
                .is_some()
            {
                duplicate.insert(row.id);
            }
        }
        let missing: Vec<usize> = expected
            .iter()
            .filter(|id| !by_id.contains_key(id))
            .copied()
            .collect();
        if !missing.is_empty() || !duplicate.is_empty() || !unexpected.is_empty() {
            return Err(ModelError::Coverage {
                missing,
                duplicate: duplicate.into_iter().collect(),
                unexpected: unexpected.into_iter().collect(),
            });
        }
        Ok(ExternalPredictions { by_id })
    }

    pub fn len(&self) -> usize {
        self.by_id.len()
    }

    pub fn is_empty(&self) -> bool {
        self.by_id.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.by_id.keys().copied().collect()
    }

    fn lookup(&self, ids: &[usize]) -> Result<Vec<Prediction>, ModelError> {
        let missing: Vec<usize> = ids
            .iter()
            .filter(|id| !self.by_id.contains_key(id))
            .copied()
            .collect();
        if !missing.is_empty() {
            return Err(ModelError::Coverage {
                missing,
                duplicate: Vec::new(),
                unexpected: Vec::new(),
            });
        }
        Ok(ids.iter().map(|id| self.by_id[id].clone()).collect())
    }
}

#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
enum Body {
    Neural {
        spec: ModelSpec,
        network: Network,
        fingerprint: Fingerprint,
    },
    External(ExternalPredictions),
}

/// A trained model (or external adapter) bound to its label space.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainedClassifier {
    body: Body,
    label_space: LabelSpace,
    history: Vec<EpochRecord>,
}

/// Serializable description of a classifier, everything except the raw
/// parameter values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub kind: ModelKind,
    pub label_space: LabelSpace,
    pub history: Vec<EpochRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub neural: Option<NeuralHeader>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub external: Option<ExternalPredictions>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeuralHeader {
    pub spec: ModelSpec,
    pub input_dim: usize,
    pub fingerprint: Fingerprint,
    pub shapes: Vec<Vec<usize>>,
}

impl TrainedClassifier {
    pub fn external(predictions: ExternalPredictions, label_space: LabelSpace) -> Self {
        TrainedClassifier {
            body: Body::External(predictions),
            label_space,
            history: Vec::new(),
        }
    }

    pub(crate) fn neural(
        spec: ModelSpec,
        network: Network,
        fingerprint: Fingerprint,
        label_space: LabelSpace,
        history: Vec<EpochRecord>,
    ) -> Self {
        TrainedClassifier {
            body: Body::Neural {
                spec,
                network,
                fingerprint,
            },
            label_space,
            history,
        }
    }

    pub fn kind(&self) -> ModelKind {
        match &self.body {
            Body::Neural { spec, .. } => spec.kind(),
            Body::External(_) => ModelKind::External,
        }
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn history(&self) -> &[EpochRecord] {
        &self.history
    }

    /// `None` for external adapters.
    pub fn fingerprint(&self) -> Option<&Fingerprint> {
        match &self.body {
            Body::Neural { fingerprint, .. } => Some(fingerprint),
            Body::External(_) => None,
        }
    }

    pub fn spec(&self) -> Option<&ModelSpec> {
        match &self.body {
            Body::Neural { spec, .. } => Some(spec),
            Body::External(_) => None,
        }
    }

    pub fn network(&self) -> Option<&Network> {
        match &self.body {
            Body::Neural { network, .. } => Some(network),
            Body::External(_) => None,
        }
    }

    /// Errors unless `batch` was encoded under this model's fingerprint.
    pub fn check_fingerprint(&self, batch: &Fingerprint) -> Result<(), ModelError> {
        match self.fingerprint() {
            Some(own) if own != batch => Err(ModelError::FingerprintMismatch {
                expected: Box::new(own.clone()),
                found: Box::new(batch.clone()),
            }),
            _ => Ok(()),
        }
    }

    /// Label and class probabilities per sequence, in input order. Neural
    /// models run without dropout; ties go to the lowest label index.
    pub fn predict(
        &self,
        table: &EmbeddingTable,
        batch: &EncodedBatch,
    ) -> Result<Vec<Prediction>, ModelError> {
        match &self.body {
            Body::External(ext) => ext.lookup(&batch.ids()),
            Body::Neural {
                network,
                fingerprint,
                ..
            } => {
                self.check_fingerprint(&batch.fingerprint)?;
                if table.content_hash() != fingerprint.embedding_hash {
                    let mut found = batch.fingerprint.clone();
                    found.embedding_hash = table.content_hash().into();
                    return Err(ModelError::FingerprintMismatch {
                        expected: Box::new(fingerprint.clone()),
                        found: Box::new(found),
                    });
                }
                batch
                    .sequences
                    .iter()
                    .map(|s| network.predict(table, s))
                    .collect()
            }
        }
    }

    pub fn predict_labels(
        &self,
        table: &EmbeddingTable,
        batch: &EncodedBatch,
    ) -> Result<Vec<usize>, ModelError> {
        Ok(self
            .predict(table, batch)?
            .into_iter()
            .map(|p| p.label)
            .collect())
    }

    pub fn header(&self) -> ModelHeader {
        let (neural, external) = match &self.body {
            Body::Neural {
                spec,
                network,
                fingerprint,
            } => (
                Some(NeuralHeader {
                    spec: spec.clone(),
                    input_dim: network.input_dim(),
                    fingerprint: fingerprint.clone(),
                    shapes: network
                        .params()
                        .iter()
                        .map(|t| t.shape().to_vec())
                        .collect(),
                }),
                None,
            ),
            Body::External(ext) => (None, Some(ext.clone())),
        };
        ModelHeader {
            kind: self.kind(),
            label_space: self.label_space.clone(),
            history: self.history.clone(),
            neural,
            external,
        }
    }

    /// Parameter tensors in a fixed order; empty for external adapters.
    pub fn parameters(&self) -> Vec<&Tensor> {
        match &self.body {
            Body::Neural { network, .. } => network.params(),
            Body::External(_) => Vec::new(),
        }
    }

    /// Rebuilds a classifier from its header and parameter values (in
    /// `parameters()` order).
    pub fn from_parts(header: ModelHeader, values: Vec<Vec<f64>>) -> Result<Self, ModelError> {
        match (header.neural, header.external) {
            (Some(neural), None) => {
                if neural.spec.kind() != header.kind {
                    return Err(ModelError::Format(
                        "model kind does not match its spec".into(),
                    ));
                }
                let mut network =
                    Network::zeros(&neural.spec, neural.input_dim, header.label_space.len());
                let mut params = network.params_mut();
                if params.len() != values.len() || params.len() != neural.shapes.len() {
                    return Err(ModelError::Format(alloc::format!(
                        "expected {} parameter tensors, found {}",
                        params.len(),
                        values.len()
                    )));
                }
                for ((param, data), shape) in params.iter_mut().zip(values).zip(&neural.shapes) {
                    if param.shape() != shape.as_slice() || data.len() != param.len() {
                        return Err(ModelError::Format(alloc::format!(
                            "parameter shape {:?} does not match header {:?}",
                            param.shape(),
                            shape
                        )));
                    }
                    param.data_mut().copy_from_slice(&data);
                }
                Ok(TrainedClassifier::neural(
                    neural.spec,
                    network,
                    neural.fingerprint,
                    header.label_space,
                    header.history,
                ))
            }
            (None, Some(external)) if header.kind == ModelKind::External && values.is_empty() => {
                Ok(TrainedClassifier::external(external, header.label_space))
            }
            _ => Err(ModelError::Format(
                "header describes neither a neural nor an external model".into(),
            )),
        }
    }
}
