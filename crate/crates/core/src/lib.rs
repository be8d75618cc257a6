//! Core of the votestack text-classification toolkit.
//!
//! Everything here is pure computation over in-memory data and builds without
//! `std`: corpus splitting, social-media text normalization, embedding lookup,
//! the hand-derived CNN/LSTM/GRU kernels with their backward passes, training,
//! priority voting and F1 evaluation. File formats, the model container and the
//! command-line front end live in the `votestack` crate.

#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod corpus;
pub mod embed;
pub mod ensemble;
pub mod evalkit;
pub(crate) mod hash;
pub(crate) mod math;
pub mod models;
pub mod nnkernel;
pub mod pipeline;
pub mod synthetic;
pub mod textprep;

pub use corpus::{DatasetSplit, LabelSpace, LabeledExample};
pub use embed::{EmbeddingTable, EncodedSequence};
pub use ensemble::{EnsembleConfig, Resolution, VoteRecord};
pub use evalkit::{ConfusionMatrix, Metric, MetricsReport};
pub use models::{ModelKind, ModelSpec, TrainConfig, TrainedClassifier};
pub use nnkernel::Tensor;
pub use pipeline::{EncodedBatch, Fingerprint, LabeledBatch, Pipeline};
pub use textprep::{NormalizationDictionary, PreprocessOptions, TokenizedText};
