//! Hard voting over member classifiers with priority-based tie resolution.
//!
//! Each member contributes one label. The label with the most votes wins.
//! When every member disagrees, the best member's label is taken. Ties
//! between equally voted labels go first to the label whose best voter has
//! the highest validation F1 on that label, then to the label voted by the
//! highest-priority member.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::embed::EmbeddingTable;
use crate::evalkit::{evaluate, EvalError, Metric};
use crate::models::{ModelError, TrainedClassifier};
use crate::pipeline::{EncodedBatch, LabeledBatch};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnsembleError {
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error("member `{member}`: {source}")]
    Member { member: String, source: ModelError },
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Member ids with their global priority and optional per-label F1 table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnsembleConfig {
    members: Vec<String>,
    /// `priority[i]` is member `i`'s rank; rank 0 is the best member.
    priority: Vec<usize>,
    /// `per_label_f1[i][label]`: member `i`'s validation F1 on `label`.
    per_label_f1: Option<Vec<Vec<f64>>>,
}

impl EnsembleConfig {
    /// Priority follows list order: the first member is the best.
    pub fn new(members: Vec<String>) -> Result<Self, EnsembleError> {
        if members.is_empty() {
            return Err(EnsembleError::Argument("ensemble has no members".into()));
        }
        for (i, m) in members.iter().enumerate() {
            if members[..i].contains(m) {
                return Err(EnsembleError::Argument(alloc::format!(
                    "duplicate member `{m}`"
                )));
            }
        }
        let priority = (0..members.len()).collect();
        Ok(EnsembleConfig {
            members,
            priority,
            per_label_f1: None,
        })
    }

    /// Overrides list-order priority; `ranks` must be a permutation of `0..m`.
    pub fn with_priority(mut self, ranks: Vec<usize>) -> Result<Self, EnsembleError> {
        let mut sorted = ranks.clone();
        sorted.sort_unstable();
        if sorted != (0..self.members.len()).collect::<Vec<_>>() {
            return Err(EnsembleError::Argument(alloc::format!(
                "priority ranks {ranks:?} are not a permutation of 0..{}",
                self.members.len()
            )));
        }
        self.priority = ranks;
        Ok(self)
    }

    /// One row per member, one column per label, values in [0, 1].
    pub fn with_per_label_f1(mut self, table: Vec<Vec<f64>>) -> Result<Self, EnsembleError> {
        if table.len() != self.members.len() {
            return Err(EnsembleError::Argument(alloc::format!(
                "per-label F1 has {} rows for {} members",
                table.len(),
                self.members.len()
            )));
        }
        let width = table[0].len();
        for (i, row) in table.iter().enumerate() {
            if row.len() != width {
                return Err(EnsembleError::Argument(alloc::format!(
                    "per-label F1 row for `{}` has {} labels, expected {width}",
                    self.members[i],
                    row.len()
                )));
            }
            if let Some(v) = row.iter().find(|v| !(0.0..=1.0).contains(*v)) {
                return Err(EnsembleError::Argument(alloc::format!(
                    "per-label F1 value {v} for `{}` outside [0, 1]",
                    self.members[i]
                )));
            }
        }
        self.per_label_f1 = Some(table);
        Ok(self)
    }

    pub fn members(&self) -> &[String] {
        &self.members
    }

    pub fn priority(&self) -> &[usize] {
        &self.priority
    }

    pub fn per_label_f1(&self) -> Option<&[Vec<f64>]> {
        self.per_label_f1.as_deref()
    }

    /// Member ids ordered from best to worst.
    pub fn members_by_priority(&self) -> Vec<&str> {
        let mut order: Vec<usize> = (0..self.members.len()).collect();
        order.sort_by_key(|&i| self.priority[i]);
        order
            .into_iter()
            .map(|i| self.members[i].as_str())
            .collect()
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Resolution {
    Majority,
    PerLabelTiebreak,
    GlobalPriorityTiebreak,
    AllDistinctFallback,
}

/// Outcome of one vote.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Vote {
    /// label → number of members that voted for it
    pub tally: BTreeMap<usize, usize>,
    pub chosen: usize,
    pub resolution: Resolution,
}

/// A vote together with the example and the individual member labels.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VoteRecord {
    pub example_id: usize,
    pub member_labels: Vec<usize>,
    pub tally: BTreeMap<usize, usize>,
    pub chosen: usize,
    pub resolution: Resolution,
}

/// Picks, among `candidates`, the label voted by the highest-priority member.
fn by_priority(member_labels: &[usize], config: &EnsembleConfig, candidates: &[usize]) -> usize {
    (0..member_labels.len())
        .filter(|&i| candidates.contains(&member_labels[i]))
        .min_by_key(|&i| config.priority[i])
        .map(|i| member_labels[i])
        .expect("every candidate label has at least one voter")
}

/// Combines one label per member (aligned with `config.members`).
pub fn vote(member_labels: &[usize], config: &EnsembleConfig) -> Result<Vote, EnsembleError> {
    let m = member_labels.len();
    if m != config.members.len() {
        return Err(EnsembleError::Argument(alloc::format!(
            "{m} member labels for {} members",
            config.members.len()
        )));
    }
    if m < 2 {
        return Err(EnsembleError::Argument(
            "voting needs at least two members".into(),
        ));
    }
    if let Some(table) = &config.per_label_f1 {
        let width = table[0].len();
        if let Some(l) = member_labels.iter().find(|&&l| l >= width) {
            return Err(EnsembleError::Argument(alloc::format!(
                "label {l} outside per-label F1 table of {width} labels"
            )));
        }
    }

    let mut tally: BTreeMap<usize, usize> = BTreeMap::new();
    for &label in member_labels {
        *tally.entry(label).or_default() += 1;
    }

    let (chosen, resolution) = if tally.len() == m {
        let best = (0..m).min_by_key(|&i| config.priority[i]).unwrap_or(0);
        (member_labels[best], Resolution::AllDistinctFallback)
    } else {
        let top = tally.values().copied().max().unwrap_or(0);
        let mut tied: Vec<usize> = tally
            .iter()
            .filter(|(_, &c)| c == top)
            .map(|(&l, _)| l)
            .collect();
        if tied.len() == 1 {
            (tied[0], Resolution::Majority)
        } else {
            let mut decided = None;
            if let Some(table) = &config.per_label_f1 {
                let score = |label: usize| {
                    (0..m)
                        .filter(|&i| member_labels[i] == label)
                        .map(|i| table[i][label])
                        .fold(f64::NEG_INFINITY, f64::max)
                };
                let best = tied
                    .iter()
                    .map(|&l| score(l))
                    .fold(f64::NEG_INFINITY, f64::max);
                tied.retain(|&l| score(l) == best);
                if tied.len() == 1 {
                    decided = Some((tied[0], Resolution::PerLabelTiebreak));
                }
            }
            decided.unwrap_or_else(|| {
                (
                    by_priority(member_labels, config, &tied),
                    Resolution::GlobalPriorityTiebreak,
                )
            })
        }
    };
    Ok(Vote {
        tally,
        chosen,
        resolution,
    })
}

/// Ensemble labels and the per-example audit trail.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleOutput {
    pub labels: Vec<usize>,
    pub records: Vec<VoteRecord>,
}

fn member_err(config: &EnsembleConfig, i: usize, source: ModelError) -> EnsembleError {
    EnsembleError::Member {
        member: config.members[i].clone(),
        source,
    }
}

/// Votes over `members` (aligned with `config.members`) for every sequence
/// of `batch`, in input order.
pub fn ensemble_predict(
    members: &[&TrainedClassifier],
    config: &EnsembleConfig,
    table: &EmbeddingTable,
    batch: &EncodedBatch,
) -> Result<EnsembleOutput, EnsembleError> {
    if members.len() != config.members.len() {
        return Err(EnsembleError::Argument(alloc::format!(
            "{} classifiers for {} configured members",
            members.len(),
            config.members.len()
        )));
    }
    if members.len() < 2 {
        return Err(EnsembleError::Argument(
            "voting needs at least two members".into(),
        ));
    }
    for (i, member) in members.iter().enumerate() {
        member
            .check_fingerprint(&batch.fingerprint)
            .map_err(|e| member_err(config, i, e))?;
    }
    let mut per_member = Vec::with_capacity(members.len());
    for (i, member) in members.iter().enumerate() {
        per_member.push(
            member
                .predict_labels(table, batch)
                .map_err(|e| member_err(config, i, e))?,
        );
    }
    let mut labels = Vec::with_capacity(batch.len());
    let mut records = Vec::with_capacity(batch.len());
    for (n, seq) in batch.sequences.iter().enumerate() {
        let member_labels: Vec<usize> = per_member.iter().map(|p| p[n]).collect();
        let v = vote(&member_labels, config)?;
        labels.push(v.chosen);
        records.push(VoteRecord {
            example_id: seq.id,
            member_labels,
            tally: v.tally,
            chosen: v.chosen,
            resolution: v.resolution,
        });
    }
    Ok(EnsembleOutput { labels, records })
}

/// Orders members by descending validation `metric` (stable on ties) and
/// records each member's per-class validation F1.
pub fn derive_priority(
    members: &[(&str, &TrainedClassifier)],
    table: &EmbeddingTable,
    validation: &LabeledBatch,
    metric: Metric,
) -> Result<EnsembleConfig, EnsembleError> {
    if validation.batch.is_empty() {
        return Err(EnsembleError::Argument("validation set is empty".into()));
    }
    let mut scored = Vec::with_capacity(members.len());
    for (id, clf) in members {
        let predicted =
            clf.predict_labels(table, &validation.batch)
                .map_err(|e| EnsembleError::Member {
                    member: (*id).into(),
                    source: e,
                })?;
        let report = evaluate(&validation.labels, &predicted, clf.label_space())?;
        let f1: Vec<f64> = report.per_class.iter().map(|c| c.f1).collect();
        scored.push((String::from(*id), report.score(metric), f1));
    }
    // stable sort keeps the original order on equal scores
    scored.sort_by(|a, b| b.1.partial_cmp(&a.1).unwrap_or(core::cmp::Ordering::Equal));
    let ids = scored.iter().map(|s| s.0.clone()).collect();
    let f1 = scored.into_iter().map(|s| s.2).collect();
    EnsembleConfig::new(ids)?.with_per_label_f1(f1)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn cfg(m: usize) -> EnsembleConfig {
        EnsembleConfig::new((0..m).map(|i| alloc::format!("M{}", i + 1)).collect()).unwrap()
    }

    const A: usize = 0;
    const B: usize = 1;
    const C: usize = 2;

    #[test]
    fn strict_majority() {
        let v = vote(&[A, A, B], &cfg(3)).unwrap();
        assert_eq!((v.chosen, v.resolution), (A, Resolution::Majority));
        assert_eq!(v.tally.get(&A), Some(&2));
    }

    #[test]
    fn all_distinct_takes_best_member() {
        let v = vote(&[A, B, C], &cfg(3)).unwrap();
        assert_eq!(
            (v.chosen, v.resolution),
            (A, Resolution::AllDistinctFallback)
        );
        let reordered = cfg(3).with_priority(vec![2, 0, 1]).unwrap();
        assert_eq!(vote(&[A, B, C], &reordered).unwrap().chosen, B);
    }

    #[test]
    fn per_label_specialist_breaks_tie() {
        // best A-voter: F1_A = 0.9; best B-voter: F1_B = 0.7
        let f1 = vec![
            vec![0.5, 0.6],
            vec![0.9, 0.1],
            vec![0.2, 0.7],
            vec![0.3, 0.4],
        ];
        let config = cfg(4).with_per_label_f1(f1).unwrap();
        let v = vote(&[A, A, B, B], &config).unwrap();
        assert_eq!((v.chosen, v.resolution), (A, Resolution::PerLabelTiebreak));
        // B voters first with the table flipped in favour of B
        let f1 = vec![
            vec![0.5, 0.95],
            vec![0.9, 0.1],
            vec![0.2, 0.7],
            vec![0.3, 0.4],
        ];
        let config = cfg(4).with_per_label_f1(f1).unwrap();
        assert_eq!(vote(&[B, A, A, B], &config).unwrap().chosen, B);
    }

    #[test]
    fn tie_without_table_uses_priority() {
        let v = vote(&[B, A, A, B], &cfg(4)).unwrap();
        assert_eq!(
            (v.chosen, v.resolution),
            (B, Resolution::GlobalPriorityTiebreak)
        );
    }

    #[test]
    fn equal_specialist_scores_fall_back_to_priority() {
        let config = cfg(4).with_per_label_f1(vec![vec![0.5, 0.5]; 4]).unwrap();
        let v = vote(&[B, A, A, B], &config).unwrap();
        assert_eq!(
            (v.chosen, v.resolution),
            (B, Resolution::GlobalPriorityTiebreak)
        );
    }

    #[test]
    fn argument_errors() {
        assert!(vote(&[A, B], &cfg(3)).is_err());
        assert!(vote(&[A], &cfg(1)).is_err());
        let config = cfg(2).with_per_label_f1(vec![vec![0.5, 0.5]; 2]).unwrap();
        assert!(vote(&[A, C], &config).is_err());
        assert!(EnsembleConfig::new(vec!["x".to_string(), "x".to_string()]).is_err());
        assert!(cfg(2).with_per_label_f1(vec![vec![1.5, 0.0]; 2]).is_err());
        assert!(cfg(2).with_priority(vec![0, 0]).is_err());
    }

    #[test]
    fn members_by_priority_order() {
        let config = cfg(3).with_priority(vec![1, 2, 0]).unwrap();
        assert_eq!(config.members_by_priority(), vec!["M3", "M1", "M2"]);
    }
}
