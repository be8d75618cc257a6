//! Seeded keyword-separable corpora for smoke tests and demos.
//!
//! Every text is a run of shared filler words with exactly one class keyword
//! inserted at a random position, so a classifier that spots the keyword is
//! always right.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::corpus::{LabelSpace, LabeledExample};
use crate::embed::EmbeddingTable;

#[derive(Debug, Clone, PartialEq)]
pub struct KeywordCorpus {
    pub examples: Vec<LabeledExample>,
    pub label_space: LabelSpace,
    /// Vectors for every filler word and keyword.
    pub embeddings: Vec<(String, Vec<f64>)>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KeywordCorpusOptions {
    pub examples: usize,
    pub classes: usize,
    pub keywords_per_class: usize,
    pub fillers: usize,
    pub min_len: usize,
    pub max_len: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for KeywordCorpusOptions {
    fn default() -> Self {
        KeywordCorpusOptions {
            examples: 500,
            classes: 3,
            keywords_per_class: 2,
            fillers: 15,
            min_len: 3,
            max_len: 8,
            dim: 32,
            seed: 0,
        }
    }
}

pub fn class_name(class: usize) -> String {
    format!("C{class}")
}

/// Lowercase-letter spelling of `i` ("a", "b", ..., "z", "ab", ...), so
/// generated words survive non-letter stripping.
fn letters(mut i: usize) -> String {
    let mut s = String::new();
    loop {
        s.push((b'a' + (i % 26) as u8) as char);
        i /= 26;
        if i == 0 {
            return s;
        }
    }
}

pub fn keyword(class: usize, k: usize) -> String {
    format!("kw{}q{}", letters(class), letters(k))
}

/// Labels cycle through the classes so class sizes differ by at most one.
pub fn keyword_corpus(opts: &KeywordCorpusOptions) -> KeywordCorpus {
    assert!(opts.classes >= 1 && opts.keywords_per_class >= 1 && opts.fillers >= 1);
    assert!(opts.min_len >= 1 && opts.min_len <= opts.max_len && opts.dim >= 1);
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let fillers: Vec<String> = (0..opts.fillers)
        .map(|i| format!("f{}", letters(i)))
        .collect();
    let mut examples = Vec::with_capacity(opts.examples);
    for id in 0..opts.examples {
        let label = id % opts.classes;
        let len = rng.gen_range(opts.min_len..=opts.max_len);
        let mut words: Vec<String> = (0..len - 1)
            .map(|_| fillers.choose(&mut rng).cloned().unwrap_or_default())
            .collect();
        let at = rng.gen_range(0..len);
        words.insert(
            at,
            keyword(label, rng.gen_range(0..opts.keywords_per_class)),
        );
        examples.push(LabeledExample {
            id,
            text: words.join(" "),
            label,
        });
    }
    let label_space =
        LabelSpace::new((0..opts.classes).map(class_name).collect()).expect("distinct class names");
    let mut vocab = fillers;
    for c in 0..opts.classes {
        vocab.extend((0..opts.keywords_per_class).map(|k| keyword(c, k)));
    }
    let embeddings = vocab
        .into_iter()
        .map(|w| {
            let v = (0..opts.dim).map(|_| rng.gen_range(-1.0..1.0)).collect();
            (w, v)
        })
        .collect();
    KeywordCorpus {
        examples,
        label_space,
        embeddings,
    }
}

impl KeywordCorpus {
    pub fn table(&self) -> EmbeddingTable {
        let dim = self.embeddings[0].1.len();
        EmbeddingTable::from_rows(dim, self.embeddings.iter().cloned())
            .expect("well-formed vectors")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn each_text_has_exactly_its_keyword() {
        let c = keyword_corpus(&KeywordCorpusOptions::default());
        assert_eq!(c.examples.len(), 500);
        for e in &c.examples {
            let keys: Vec<&str> = e.text.split(' ').filter(|w| w.starts_with("kw")).collect();
            assert_eq!(keys.len(), 1);
            assert!((0..2).any(|k| keys[0] == keyword(e.label, k)));
            assert!(e.text.chars().all(|c| c.is_ascii_lowercase() || c == ' '));
        }
        assert_eq!(c.table().vocab_len(), 15 + 6);
    }

    #[test]
    fn seeded() {
        let o = KeywordCorpusOptions::default();
        assert_eq!(keyword_corpus(&o), keyword_corpus(&o));
        assert_ne!(
            keyword_corpus(&o),
            keyword_corpus(&KeywordCorpusOptions { seed: 1, ..o })
        );
    }
}
