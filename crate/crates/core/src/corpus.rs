//! Labeled examples, the label space, and reproducible splits / k-fold partitions.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CorpusError {
    #[error("dataset is empty")]
    EmptyDataset,
    #[error("record {id} (line {line}): text is empty")]
    EmptyText { id: usize, line: usize },
    #[error("record {id} (line {line}): label is empty")]
    EmptyLabel { id: usize, line: usize },
    #[error("label space: {0}")]
    LabelSpace(String),
    #[error("example {id}: label index {label} outside label space of {len}")]
    LabelOutOfRange { id: usize, label: usize, len: usize },
    #[error("stratification: class `{class}` has {count} examples, need at least {needed}")]
    Stratification {
        class: String,
        count: usize,
        needed: usize,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub id: usize,
    pub text: String,
    pub label: usize,
}

/// Ordered, duplicate-free label inventory. Indices are stable for the lifetime
/// of a dataset and are serialized with every model.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelSpace {
    labels: Vec<String>,
}

impl LabelSpace {
    pub fn new(labels: Vec<String>) -> Result<Self, CorpusError> {
        for (i, label) in labels.iter().enumerate() {
            if label.trim().is_empty() {
                return Err(CorpusError::LabelSpace(alloc::format!(
                    "label {i} is empty"
                )));
            }
            if labels[..i].contains(label) {
                return Err(CorpusError::LabelSpace(alloc::format!(
                    "duplicate label `{label}`"
                )));
            }
        }
        if labels.is_empty() {
            return Err(CorpusError::LabelSpace("no labels".to_string()));
        }
        Ok(LabelSpace { labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    pub fn name(&self, index: usize) -> Option<&str> {
        self.labels.get(index).map(String::as_str)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }
}

impl TryFrom<Vec<String>> for LabelSpace {
    type Error = CorpusError;

    fn try_from(labels: Vec<String>) -> Result<Self, Self::Error> {
        LabelSpace::new(labels)
    }
}

impl From<LabelSpace> for Vec<String> {
    fn from(space: LabelSpace) -> Self {
        space.labels
    }
}

/// One parsed row before label interning; `line` is the 1-based source line.
#[derive(Debug, Clone)]
pub struct RawRecord {
    pub line: usize,
    pub text: String,
    pub label: String,
}

/// Assigns ids in input order and builds the label space in first-appearance order.
pub fn build_dataset<I>(records: I) -> Result<(Vec<LabeledExample>, LabelSpace), CorpusError>
where
    I: IntoIterator<Item = RawRecord>,
{
    let mut labels: Vec<String> = Vec::new();
    let mut examples = Vec::new();
    for (id, record) in records.into_iter().enumerate() {
        if record.text.trim().is_empty() {
            return Err(CorpusError::EmptyText {
                id,
                line: record.line,
            });
        }
        let label = record.label.trim();
        if label.is_empty() {
            return Err(CorpusError::EmptyLabel {
                id,
                line: record.line,
            });
        }
        let index = match labels.iter().position(|l| l == label) {
            Some(i) => i,
            None => {
                labels.push(label.to_string());
                labels.len() - 1
            }
        };
        examples.push(LabeledExample {
            id,
            text: record.text,
            label: index,
        });
    }
    if examples.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    Ok((examples, LabelSpace::new(labels)?))
}

pub fn check_labels(examples: &[LabeledExample], space: &LabelSpace) -> Result<(), CorpusError> {
    match examples.iter().find(|e| e.label >= space.len()) {
        Some(e) => Err(CorpusError::LabelOutOfRange {
            id: e.id,
            label: e.label,
            len: space.len(),
        }),
        None => Ok(()),
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplit {
    pub train: Vec<LabeledExample>,
    pub validation: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Groups example positions by class, each group shuffled with `rng`.
/// Classes come out in label-index order.
fn shuffled_classes(examples: &[LabeledExample], rng: &mut ChaCha8Rng) -> Vec<(usize, Vec<usize>)> {
    let mut by_class: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for (pos, example) in examples.iter().enumerate() {
        by_class.entry(example.label).or_default().push(pos);
    }
    by_class
        .into_iter()
        .map(|(label, mut positions)| {
            positions.shuffle(rng);
            (label, positions)
        })
        .collect()
}

/// Largest-remainder allocation of `n` items over `ratios`: every share is the
/// floor or ceiling of `ratio * n`, and the shares sum to `n`.
pub(crate) fn allocate(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut counts: Vec<usize> = exact
        .iter()
        .map(|x| math::floor(x + 1e-9) as usize)
        .collect();
    let assigned: usize = counts.iter().sum();
    let mut order: Vec<usize> = (0..ratios.len()).collect();
    // Largest fractional part first; earlier split wins a tie.
    order.sort_by(|&a, &b| {
        let fa = exact[a] - counts[a] as f64;
        let fb = exact[b] - counts[b] as f64;
        fb.partial_cmp(&fa)
            .unwrap_or(core::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    for &slot in order.iter().take(n.saturating_sub(assigned)) {
        counts[slot] += 1;
    }
    counts
}

fn class_name(space: Option<&LabelSpace>, label: usize) -> String {
    space
        .and_then(|s| s.name(label))
        .map(ToString::to_string)
        .unwrap_or_else(|| alloc::format!("#{label}"))
}

/// Per-class stratified partition of `examples` into `ratios.len()` parts,
/// each part sorted by id.
pub(crate) fn stratified_parts(
    examples: &[LabeledExample],
    ratios: &[f64],
    seed: u64,
) -> Vec<Vec<LabeledExample>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut parts: Vec<Vec<LabeledExample>> = ratios.iter().map(|_| Vec::new()).collect();
    for (_, positions) in shuffled_classes(examples, &mut rng) {
        let counts = allocate(positions.len(), ratios);
        let mut cursor = 0;
        for (part, count) in parts.iter_mut().zip(counts) {
            part.extend(
                positions[cursor..cursor + count]
                    .iter()
                    .map(|&p| examples[p].clone()),
            );
            cursor += count;
        }
    }
    for part in &mut parts {
        part.sort_by_key(|e| e.id);
    }
    parts
}

/// Stratified train/validation/test split.
///
/// For every class `c` and split `s`, `|count(c, s) - ratio(s) * count(c)| < 1`.
/// `space` is only used to name classes in errors.
pub fn stratified_split(
    examples: &[LabeledExample],
    ratios: [f64; 3],
    seed: u64,
    space: Option<&LabelSpace>,
) -> Result<DatasetSplit, CorpusError> {
    if examples.is_empty() {
        return Err(CorpusError::EmptyDataset);
    }
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(CorpusError::Argument(alloc::format!(
            "split ratios must be positive, got {ratios:?}"
        )));
    }
    let total: f64 = ratios.iter().sum();
    if math::abs(total - 1.0) > 1e-6 {
        return Err(CorpusError::Argument(alloc::format!(
            "split ratios must sum to 1, got {total}"
        )));
    }
    let mut counts: BTreeMap<usize, usize> = BTreeMap::new();
    for e in examples {
        *counts.entry(e.label).or_default() += 1;
    }
    if let Some((&label, &count)) = counts.iter().find(|(_, &c)| c < 3) {
        return Err(CorpusError::Stratification {
            class: class_name(space, label),
            count,
            needed: 3,
        });
    }
    let mut parts = stratified_parts(examples, &ratios, seed);
    let test = parts.pop().unwrap_or_default();
    let validation = parts.pop().unwrap_or_default();
    let train = parts.pop().unwrap_or_default();
    Ok(DatasetSplit {
        train,
        validation,
        test,
    })
}

/// Carves a stratified holdout of roughly `fraction` of each class.
/// Returns `(rest, holdout)`.
pub fn stratified_holdout(
    examples: &[LabeledExample],
    fraction: f64,
    seed: u64,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>), CorpusError> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(CorpusError::Argument(alloc::format!(
            "holdout fraction must be in (0, 1), got {fraction}"
        )));
    }
    let mut parts = stratified_parts(examples, &[1.0 - fraction, fraction], seed);
    let holdout = parts.pop().unwrap_or_default();
    let rest = parts.pop().unwrap_or_default();
    Ok((rest, holdout))
}

/// One cross-validation round: train is the dataset minus `test`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fold {
    pub train: Vec<LabeledExample>,
    pub test: Vec<LabeledExample>,
}

/// Partitions the dataset into `k` disjoint test folds.
///
/// With `stratify`, examples of each class are dealt round-robin over the folds
/// and the dealing position carries over from one class to the next, so both
/// the per-class and the overall fold sizes differ by at most one.
pub fn kfold_partitions(
    examples: &[LabeledExample],
    k: usize,
    seed: u64,
    stratify: bool,
    space: Option<&LabelSpace>,
) -> Result<Vec<Fold>, CorpusError> {
    if k < 2 {
        return Err(CorpusError::Argument(alloc::format!(
            "k must be at least 2, got {k}"
        )));
    }
    if k > examples.len() {
        return Err(CorpusError::Argument(alloc::format!(
            "k = {k} exceeds dataset size {}",
            examples.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let groups: Vec<Vec<usize>> = if stratify {
        let classes = shuffled_classes(examples, &mut rng);
        if let Some((label, positions)) = classes.iter().find(|(_, p)| p.len() < k) {
            return Err(CorpusError::Stratification {
                class: class_name(space, *label),
                count: positions.len(),
                needed: k,
            });
        }
        classes.into_iter().map(|(_, p)| p).collect()
    } else {
        let mut all: Vec<usize> = (0..examples.len()).collect();
        all.shuffle(&mut rng);
        alloc::vec![all]
    };

    let mut assignment: Vec<Vec<usize>> = (0..k).map(|_| Vec::new()).collect();
    let mut next = 0usize;
    for positions in groups {
        for p in positions {
            assignment[next].push(p);
            next = (next + 1) % k;
        }
    }

    let mut fold_of = alloc::vec![0usize; examples.len()];
    for (fold, positions) in assignment.iter().enumerate() {
        for &p in positions {
            fold_of[p] = fold;
        }
    }
    let mut folds = Vec::with_capacity(k);
    for fold in 0..k {
        let mut train = Vec::new();
        let mut test = Vec::new();
        for (p, example) in examples.iter().enumerate() {
            if fold_of[p] == fold {
                test.push(example.clone());
            } else {
                train.push(example.clone());
            }
        }
        train.sort_by_key(|e| e.id);
        test.sort_by_key(|e| e.id);
        folds.push(Fold { train, test });
    }
    Ok(folds)
}
