//! Text → token → index pipeline and the fingerprint that pins a model to it.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::LabeledExample;
use crate::embed::{encode_sequence, suggest_max_len, EmbedError, EmbeddingTable, EncodedSequence};
use crate::textprep::{
    apply_dictionary, normalize_text, tokenize, Lexicon, NormalizationDictionary,
    PreprocessOptions, TokenizedText,
};

/// Everything that decides how raw text becomes model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Fingerprint {
    pub preprocess: PreprocessOptions,
    pub dictionary_hash: Option<String>,
    pub lexicon_hash: Option<String>,
    pub embedding_hash: String,
    pub max_len: usize,
}

impl core::fmt::Display for Fingerprint {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        fn short(h: &Option<String>) -> &str {
            h.as_deref().map_or("none", |s| &s[..s.len().min(12)])
        }
        write!(
            f,
            "{{preprocess: {:?}, dictionary: {}, lexicon: {}, embeddings: {}, max_len: {}}}",
            self.preprocess,
            short(&self.dictionary_hash),
            short(&self.lexicon_hash),
            &self.embedding_hash[..self.embedding_hash.len().min(12)],
            self.max_len
        )
    }
}

/// Sequences encoded under one fingerprint.
#[derive(Debug, Clone, PartialEq)]
pub struct EncodedBatch {
    pub fingerprint: Fingerprint,
    pub sequences: Vec<EncodedSequence>,
}

impl EncodedBatch {
    pub fn len(&self) -> usize {
        self.sequences.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sequences.is_empty()
    }

    pub fn ids(&self) -> Vec<usize> {
        self.sequences.iter().map(|s| s.id).collect()
    }
}

/// An encoded batch with gold labels aligned to its sequences.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledBatch {
    pub batch: EncodedBatch,
    pub labels: Vec<usize>,
}

/// Normalization options, dictionary, lexicon, embeddings and `max_len`.
#[derive(Debug, Clone)]
pub struct Pipeline {
    pub options: PreprocessOptions,
    pub dictionary: Option<NormalizationDictionary>,
    pub lexicon: Option<Lexicon>,
    pub table: EmbeddingTable,
    pub max_len: usize,
}

impl Pipeline {
    pub fn new(options: PreprocessOptions, table: EmbeddingTable, max_len: usize) -> Self {
        Pipeline {
            options,
            dictionary: None,
            lexicon: None,
            table,
            max_len,
        }
    }

    pub fn with_dictionary(mut self, dictionary: NormalizationDictionary) -> Self {
        self.dictionary = Some(dictionary);
        self
    }

    pub fn with_lexicon(mut self, lexicon: Lexicon) -> Self {
        self.lexicon = Some(lexicon);
        self
    }

    pub fn fingerprint(&self) -> Fingerprint {
        let dictionary_hash = self
            .dictionary
            .as_ref()
            .filter(|_| self.options.apply_dictionary)
            .map(NormalizationDictionary::content_hash);
        Fingerprint {
            preprocess: self.options,
            dictionary_hash,
            lexicon_hash: self.lexicon.as_ref().map(Lexicon::content_hash),
            embedding_hash: self.table.content_hash().into(),
            max_len: self.max_len,
        }
    }

    /// normalize → dictionary (on whitespace tokens) → lexicon segmentation.
    pub fn preprocess(&self, text: &str) -> TokenizedText {
        let normalized = normalize_text(text, &self.options);
        let mut tokens = TokenizedText::from_whitespace(&normalized);
        if self.options.apply_dictionary {
            if let Some(dict) = &self.dictionary {
                tokens = apply_dictionary(&tokens, dict);
            }
        }
        match &self.lexicon {
            Some(lexicon) => tokenize(&tokens.join(), Some(lexicon)),
            None => tokens,
        }
    }

    pub fn encode(&self, examples: &[LabeledExample]) -> Result<LabeledBatch, EmbedError> {
        let mut sequences = Vec::with_capacity(examples.len());
        for e in examples {
            sequences.push(encode_sequence(
                e.id,
                &self.preprocess(&e.text),
                &self.table,
                self.max_len,
            )?);
        }
        Ok(LabeledBatch {
            batch: EncodedBatch {
                fingerprint: self.fingerprint(),
                sequences,
            },
            labels: examples.iter().map(|e| e.label).collect(),
        })
    }

    /// `max_len` covering `percentile` of the given texts after preprocessing.
    pub fn suggest_max_len(&self, texts: &[&str], percentile: f64) -> Result<usize, EmbedError> {
        let lengths: Vec<usize> = texts.iter().map(|t| self.preprocess(t).len()).collect();
        suggest_max_len(&lengths, percentile)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn table() -> EmbeddingTable {
        EmbeddingTable::from_rows(
            2,
            ["không", "bao", "giờ", "vui", "không_bao_giờ"]
                .iter()
                .enumerate()
                .map(|(i, w)| (w.to_string(), vec![i as f64, 1.0])),
        )
        .unwrap()
    }

    #[test]
    fn dictionary_then_lexicon() {
        let dict = NormalizationDictionary::from_pairs([("kbh", "không bao giờ")]).unwrap();
        let p = Pipeline::new(PreprocessOptions::default(), table(), 4)
            .with_dictionary(dict)
            .with_lexicon(Lexicon::new(["không bao giờ"]));
        assert_eq!(
            p.preprocess("KBH vui!!").tokens(),
            &["không_bao_giờ", "vui"]
        );
    }

    #[test]
    fn fingerprint_tracks_options() {
        let a = Pipeline::new(PreprocessOptions::default(), table(), 4);
        let b = Pipeline::new(PreprocessOptions::none(), table(), 4);
        let c = Pipeline::new(PreprocessOptions::default(), table(), 5);
        assert_ne!(a.fingerprint(), b.fingerprint());
        assert_ne!(a.fingerprint(), c.fingerprint());
        assert_eq!(a.fingerprint(), a.clone().fingerprint());
    }

    #[test]
    fn encode_keeps_ids_and_labels() {
        let p = Pipeline::new(PreprocessOptions::default(), table(), 3);
        let examples = vec![
            LabeledExample {
                id: 4,
                text: "vui vui".into(),
                label: 1,
            },
            LabeledExample {
                id: 9,
                text: "lạ".into(),
                label: 0,
            },
        ];
        let enc = p.encode(&examples).unwrap();
        assert_eq!(enc.batch.ids(), vec![4, 9]);
        assert_eq!(enc.labels, vec![1, 0]);
        assert_eq!(enc.batch.sequences[1].indices[0], crate::embed::OOV_INDEX);
    }
}
