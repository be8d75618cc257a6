//! Frozen pre-trained word vectors and fixed-length index encoding.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::ContentHasher;
use crate::textprep::TokenizedText;

pub const PAD_INDEX: usize = 0;
pub const OOV_INDEX: usize = 1;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EmbedError {
    #[error("embedding dimension must be positive")]
    ZeroDim,
    #[error("vector for `{token}` has {found} values, expected {expected}")]
    WrongLength {
        token: String,
        found: usize,
        expected: usize,
    },
    #[error("vector for `{token}` contains a non-finite value")]
    NonFinite { token: String },
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Token → row map over a row-major matrix. Row 0 is PAD (all zeros),
/// row 1 is OOV (mean of the loaded vectors), words start at row 2.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable {
    vocab: BTreeMap<String, usize>,
    matrix: Vec<f64>,
    dim: usize,
    hash: String,
}

impl EmbeddingTable {
    /// Builds a table from `(token, vector)` rows in file order. Duplicate
    /// tokens keep their first vector.
    pub fn from_rows<I>(dim: usize, rows: I) -> Result<Self, EmbedError>
    where
        I: IntoIterator<Item = (String, Vec<f64>)>,
    {
        if dim == 0 {
            return Err(EmbedError::ZeroDim);
        }
        let mut vocab = BTreeMap::new();
        let mut matrix = vec![0.0; 2 * dim];
        let mut hasher = ContentHasher::new();
        hasher.update(&(dim as u64).to_le_bytes());
        for (token, vector) in rows {
            if vector.len() != dim {
                return Err(EmbedError::WrongLength {
                    token,
                    found: vector.len(),
                    expected: dim,
                });
            }
            if vector.iter().any(|v| !v.is_finite()) {
                return Err(EmbedError::NonFinite { token });
            }
            if vocab.contains_key(&token) {
                continue;
            }
            hasher.field(token.as_bytes());
            for v in &vector {
                hasher.update(&v.to_bits().to_le_bytes());
            }
            vocab.insert(token, matrix.len() / dim);
            matrix.extend_from_slice(&vector);
        }
        let words = vocab.len();
        if words > 0 {
            for d in 0..dim {
                let sum: f64 = (0..words).map(|w| matrix[(w + 2) * dim + d]).sum();
                matrix[OOV_INDEX * dim + d] = sum / words as f64;
            }
        }
        Ok(EmbeddingTable {
            vocab,
            matrix,
            dim,
            hash: hasher.finish_hex(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of matrix rows, including PAD and OOV.
    pub fn rows(&self) -> usize {
        self.matrix.len() / self.dim
    }

    pub fn vocab_len(&self) -> usize {
        self.vocab.len()
    }

    pub fn index_of(&self, token: &str) -> usize {
        self.vocab.get(token).copied().unwrap_or(OOV_INDEX)
    }

    pub fn contains(&self, token: &str) -> bool {
        self.vocab.contains_key(token)
    }

    pub fn row(&self, index: usize) -> &[f64] {
        &self.matrix[index * self.dim..(index + 1) * self.dim]
    }

    /// Content hash over dim, tokens and vector bits; recorded in fingerprints.
    pub fn content_hash(&self) -> &str {
        &self.hash
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedSequence {
    /// Id of the example this sequence was encoded from.
    pub id: usize,
    pub indices: Vec<usize>,
    pub true_length: usize,
}

impl EncodedSequence {
    pub fn max_len(&self) -> usize {
        self.indices.len()
    }
}

/// Maps tokens to rows, truncating at the tail and padding with PAD.
pub fn encode_sequence(
    id: usize,
    tokens: &TokenizedText,
    table: &EmbeddingTable,
    max_len: usize,
) -> Result<EncodedSequence, EmbedError> {
    if max_len == 0 {
        return Err(EmbedError::Argument("max_len must be at least 1".into()));
    }
    let mut indices = vec![PAD_INDEX; max_len];
    let true_length = tokens.len().min(max_len);
    for (slot, token) in indices.iter_mut().zip(tokens.tokens()) {
        *slot = table.index_of(token);
    }
    Ok(EncodedSequence {
        id,
        indices,
        true_length,
    })
}

/// Smallest `L >= 1` such that at least `percentile` of the sequences have at
/// most `L` tokens.
pub fn suggest_max_len(lengths: &[usize], percentile: f64) -> Result<usize, EmbedError> {
    if lengths.is_empty() {
        return Err(EmbedError::Argument("cannot size an empty dataset".into()));
    }
    if !(percentile > 0.0 && percentile <= 1.0) {
        return Err(EmbedError::Argument(alloc::format!(
            "percentile must be in (0, 1], got {percentile}"
        )));
    }
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    let n = sorted.len() as f64;
    let needed = percentile * n - 1e-9;
    let position = sorted
        .iter()
        .enumerate()
        .find(|(i, _)| (*i + 1) as f64 >= needed)
        .map(|(i, _)| i)
        .unwrap_or(sorted.len() - 1);
    Ok(sorted[position].max(1))
}
