//! Social-media text normalization, the slang/abbreviation dictionary, and a
//! longest-match syllable tokenizer.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::hash::ContentHasher;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TextError {
    #[error("dictionary entry `{key}`: {reason}")]
    Dictionary { key: String, reason: &'static str },
    #[error("token `{0}` is empty or contains whitespace")]
    Token(String),
}

/// Which normalization rules run. Rules always apply in the order
/// URL removal, lowercase, non-letter stripping, whitespace collapse.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct PreprocessOptions {
    pub lowercase: bool,
    pub strip_urls: bool,
    pub strip_non_letters: bool,
    pub collapse_whitespace: bool,
    pub apply_dictionary: bool,
}

impl Default for PreprocessOptions {
    fn default() -> Self {
        PreprocessOptions {
            lowercase: true,
            strip_urls: true,
            strip_non_letters: true,
            collapse_whitespace: true,
            apply_dictionary: true,
        }
    }
}

impl PreprocessOptions {
    /// Every rule off: `normalize_text` becomes the identity.
    pub fn none() -> Self {
        PreprocessOptions {
            lowercase: false,
            strip_urls: false,
            strip_non_letters: false,
            collapse_whitespace: false,
            apply_dictionary: false,
        }
    }
}

const URL_PREFIXES: [&str; 3] = ["http://", "https://", "www."];

fn url_start(text: &str) -> Option<usize> {
    text.char_indices().map(|(i, _)| i).find(|&i| {
        let rest = &text.as_bytes()[i..];
        URL_PREFIXES
            .iter()
            .any(|p| rest.len() >= p.len() && rest[..p.len()].eq_ignore_ascii_case(p.as_bytes()))
    })
}

/// Deletes every run from a URL prefix up to the next whitespace.
fn remove_urls(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut rest = text;
    while let Some(start) = url_start(rest) {
        out.push_str(&rest[..start]);
        let tail = &rest[start..];
        let end = tail.find(char::is_whitespace).unwrap_or(tail.len());
        rest = &tail[end..];
    }
    out.push_str(rest);
    out
}

fn is_combining_mark(c: char) -> bool {
    matches!(c as u32, 0x0300..=0x036F | 0x1AB0..=0x1AFF | 0x1DC0..=0x1DFF | 0x20D0..=0x20FF)
}

/// Replaces every character that is not a Unicode letter (or `_`) with a space.
/// Combining diacritics attached to a kept letter survive, so decomposed
/// Vietnamese text keeps its tone marks.
fn strip_non_letters(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    let mut after_letter = false;
    for c in text.chars() {
        if c.is_alphabetic() || c == '_' {
            out.push(c);
            after_letter = true;
        } else if after_letter && is_combining_mark(c) {
            out.push(c);
        } else if c.is_whitespace() {
            out.push(c);
            after_letter = false;
        } else {
            out.push(' ');
            after_letter = false;
        }
    }
    out
}

fn collapse_whitespace(text: &str) -> String {
    let mut out = String::with_capacity(text.len());
    for word in text.split_whitespace() {
        if !out.is_empty() {
            out.push(' ');
        }
        out.push_str(word);
    }
    out
}

/// Applies the enabled rules in fixed order. Idempotent for every option set.
pub fn normalize_text(text: &str, options: &PreprocessOptions) -> String {
    let mut text = text.to_string();
    if options.strip_urls {
        text = remove_urls(&text);
    }
    if options.lowercase {
        text = text.to_lowercase();
    }
    if options.strip_non_letters {
        text = strip_non_letters(&text);
    }
    if options.collapse_whitespace {
        text = collapse_whitespace(&text);
    }
    text
}

/// Ordered tokens, none empty and none containing whitespace.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TokenizedText {
    tokens: Vec<String>,
}

impl TokenizedText {
    pub fn new(tokens: Vec<String>) -> Result<Self, TextError> {
        if let Some(bad) = tokens
            .iter()
            .find(|t| t.is_empty() || t.chars().any(char::is_whitespace))
        {
            return Err(TextError::Token(bad.clone()));
        }
        Ok(TokenizedText { tokens })
    }

    /// Splits on whitespace; always valid.
    pub fn from_whitespace(text: &str) -> Self {
        TokenizedText {
            tokens: text.split_whitespace().map(ToString::to_string).collect(),
        }
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn into_tokens(self) -> Vec<String> {
        self.tokens
    }

    /// Tokens joined by single spaces.
    pub fn join(&self) -> String {
        self.tokens.join(" ")
    }
}

/// Whole-token variant → canonical form map.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct NormalizationDictionary {
    entries: BTreeMap<String, String>,
}

impl NormalizationDictionary {
    /// Keys must be lowercase, whitespace-free, unique, and differ from their
    /// value. Canonical forms may contain spaces (multi-token expansion).
    pub fn from_pairs<I, K, V>(pairs: I) -> Result<Self, TextError>
    where
        I: IntoIterator<Item = (K, V)>,
        K: Into<String>,
        V: Into<String>,
    {
        let mut entries = BTreeMap::new();
        for (key, value) in pairs {
            let key: String = key.into();
            let value: String = value.into();
            let err = |reason| TextError::Dictionary {
                key: key.clone(),
                reason,
            };
            if key.is_empty() || key.chars().any(char::is_whitespace) {
                return Err(err("key is empty or contains whitespace"));
            }
            if key.to_lowercase() != key {
                return Err(err("key is not lowercase"));
            }
            if value.split_whitespace().next().is_none() {
                return Err(err("canonical form is empty"));
            }
            if key == value {
                return Err(err("key equals its canonical form"));
            }
            if entries.contains_key(&key) {
                return Err(err("duplicate key"));
            }
            entries.insert(key, value);
        }
        Ok(NormalizationDictionary { entries })
    }

    pub fn get(&self, token: &str) -> Option<&str> {
        self.entries.get(token).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &str)> {
        self.entries.iter().map(|(k, v)| (k.as_str(), v.as_str()))
    }

    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        for (k, v) in &self.entries {
            h.field(k.as_bytes());
            h.field(v.as_bytes());
        }
        h.finish_hex()
    }
}

/// Replaces dictionary keys by their canonical forms; multi-word canonical
/// forms expand in place.
pub fn apply_dictionary(tokens: &TokenizedText, dict: &NormalizationDictionary) -> TokenizedText {
    let mut out = Vec::with_capacity(tokens.len());
    for token in tokens.tokens() {
        match dict.get(token) {
            Some(canonical) => out.extend(canonical.split_whitespace().map(ToString::to_string)),
            None => out.push(token.clone()),
        }
    }
    TokenizedText { tokens: out }
}

/// Multi-syllable compound words, stored as syllable sequences.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Lexicon {
    words: BTreeSet<Vec<String>>,
    longest: usize,
}

impl Lexicon {
    /// Each entry is a space-separated syllable sequence; single-syllable and
    /// blank entries carry no information and are skipped.
    pub fn new<I, S>(entries: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        let mut words = BTreeSet::new();
        for entry in entries {
            let syllables: Vec<String> = entry
                .as_ref()
                .split(|c: char| c.is_whitespace() || c == '_')
                .filter(|s| !s.is_empty())
                .map(str::to_lowercase)
                .collect();
            if syllables.len() >= 2 {
                words.insert(syllables);
            }
        }
        let longest = words.iter().map(Vec::len).max().unwrap_or(0);
        Lexicon { words, longest }
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    fn contains(&self, syllables: &[String]) -> bool {
        self.words.contains(syllables)
    }

    pub fn content_hash(&self) -> String {
        let mut h = ContentHasher::new();
        for word in &self.words {
            h.field(word.join(" ").as_bytes());
        }
        h.finish_hex()
    }
}

/// Whitespace tokenization, optionally joining lexicon compounds with `_`
/// by greedy left-to-right longest match.
pub fn tokenize(text: &str, lexicon: Option<&Lexicon>) -> TokenizedText {
    let syllables: Vec<String> = text.split_whitespace().map(ToString::to_string).collect();
    let Some(lexicon) = lexicon.filter(|l| !l.is_empty()) else {
        return TokenizedText { tokens: syllables };
    };
    let mut tokens = Vec::with_capacity(syllables.len());
    let mut i = 0;
    while i < syllables.len() {
        let max = lexicon.longest.min(syllables.len() - i);
        let span = (2..=max)
            .rev()
            .find(|&n| lexicon.contains(&syllables[i..i + n]))
            .unwrap_or(1);
        tokens.push(syllables[i..i + span].join("_"));
        i += span;
    }
    TokenizedText { tokens }
}
