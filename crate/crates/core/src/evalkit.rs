//! Confusion matrices, per-class and averaged F1, and the k-fold runner.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::corpus::{self, CorpusError, LabelSpace, LabeledExample};
use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("invalid argument: {0}")]
    Argument(String),
}

/// Which aggregate a protocol reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    #[default]
    WeightedF1,
    MicroF1,
    MacroF1,
}

impl Metric {
    pub fn name(self) -> &'static str {
        match self {
            Metric::WeightedF1 => "weighted_f1",
            Metric::MicroF1 => "micro_f1",
            Metric::MacroF1 => "macro_f1",
        }
    }
}

/// Rows are gold labels, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
    label_space: LabelSpace,
}

impl ConfusionMatrix {
    pub fn count(&self, gold: usize, predicted: usize) -> u64 {
        self.counts[gold][predicted]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn label_space(&self) -> &LabelSpace {
        &self.label_space
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }
}

pub fn confusion_matrix(
    gold: &[usize],
    pred: &[usize],
    label_space: &LabelSpace,
) -> Result<ConfusionMatrix, EvalError> {
    if gold.len() != pred.len() {
        return Err(EvalError::Argument(alloc::format!(
            "{} gold labels vs {} predictions",
            gold.len(),
            pred.len()
        )));
    }
    if gold.is_empty() {
        return Err(EvalError::Argument("no examples to evaluate".into()));
    }
    let k = label_space.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (i, (&g, &p)) in gold.iter().zip(pred).enumerate() {
        if g >= k || p >= k {
            return Err(EvalError::Argument(alloc::format!(
                "example {i}: label pair ({g}, {p}) outside {k} classes"
            )));
        }
        counts[g][p] += 1;
    }
    Ok(ConfusionMatrix {
        counts,
        label_space: label_space.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub macro_f1: f64,
    pub micro_f1: f64,
    pub weighted_f1: f64,
    pub accuracy: f64,
    pub total: u64,
}

impl MetricsReport {
    pub fn score(&self, metric: Metric) -> f64 {
        match metric {
            Metric::WeightedF1 => self.weighted_f1,
            Metric::MicroF1 => self.micro_f1,
            Metric::MacroF1 => self.macro_f1,
        }
    }
}

fn ratio(num: u64, den: u64) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 plus macro, micro and support-weighted F1.
/// Any metric with a zero denominator is reported as 0. Macro averages over
/// every class of the label space, including classes with no support.
pub fn f1_report(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.counts.len();
    let total = cm.total();
    let mut per_class = Vec::with_capacity(k);
    let mut trace = 0;
    for c in 0..k {
        let tp = cm.counts[c][c];
        let support: u64 = cm.counts[c].iter().sum();
        let predicted: u64 = cm.counts.iter().map(|row| row[c]).sum();
        let (fp, fn_) = (predicted - tp, support - tp);
        trace += tp;
        per_class.push(ClassMetrics {
            label: cm.label_space.name(c).unwrap_or_default().into(),
            precision: ratio(tp, tp + fp),
            recall: ratio(tp, tp + fn_),
            f1: ratio(2 * tp, 2 * tp + fp + fn_),
            support,
        });
    }
    let macro_f1 = per_class.iter().map(|c| c.f1).sum::<f64>() / k as f64;
    let weighted_f1 = if total == 0 {
        0.0
    } else {
        per_class
            .iter()
            .map(|c| c.support as f64 * c.f1)
            .sum::<f64>()
            / total as f64
    };
    // pooled: FP = FN = total - trace
    let wrong = total - trace;
    MetricsReport {
        per_class,
        macro_f1,
        micro_f1: ratio(2 * trace, 2 * trace + 2 * wrong),
        weighted_f1,
        accuracy: ratio(trace, total),
        total,
    }
}

/// Convenience: confusion matrix and report in one call.
pub fn evaluate(
    gold: &[usize],
    pred: &[usize],
    label_space: &LabelSpace,
) -> Result<MetricsReport, EvalError> {
    Ok(f1_report(&confusion_matrix(gold, pred, label_space)?))
}

/// Trains and applies one model per fold.
pub trait FoldTrainer {
    type Model;
    type Error;

    fn fit(
        &mut self,
        fold: usize,
        seed: u64,
        train: &[LabeledExample],
        validation: &[LabeledExample],
    ) -> Result<Self::Model, Self::Error>;

    fn predict(
        &self,
        model: &Self::Model,
        test: &[LabeledExample],
    ) -> Result<Vec<usize>, Self::Error>;
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CvOptions {
    pub k: usize,
    pub seed: u64,
    pub stratify: bool,
    pub metric: Metric,
    /// Share of each fold's training part held out for early stopping.
    pub validation_fraction: f64,
}

impl Default for CvOptions {
    fn default() -> Self {
        CvOptions {
            k: 5,
            seed: 0,
            stratify: true,
            metric: Metric::MacroF1,
            validation_fraction: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrossValidation {
    pub metric: Metric,
    pub fold_scores: Vec<f64>,
    pub fold_reports: Vec<MetricsReport>,
    pub mean: f64,
    /// Population standard deviation of the fold scores.
    pub std_dev: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CvError<E> {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("fold {fold}: {cause}")]
    Fold { fold: usize, cause: E },
}

/// k-fold cross-validation. Fold `i` trains with seed `seed + i` on its
/// training part minus a stratified validation slice, then scores the
/// held-out fold.
pub fn crossvalidate<T: FoldTrainer>(
    examples: &[LabeledExample],
    label_space: &LabelSpace,
    options: &CvOptions,
    trainer: &mut T,
) -> Result<CrossValidation, CvError<T::Error>> {
    let folds = corpus::kfold_partitions(
        examples,
        options.k,
        options.seed,
        options.stratify,
        Some(label_space),
    )?;
    let mut fold_scores = Vec::with_capacity(folds.len());
    let mut fold_reports = Vec::with_capacity(folds.len());
    for (i, fold) in folds.iter().enumerate() {
        let seed = options.seed.wrapping_add(i as u64);
        let (train, validation) =
            corpus::stratified_holdout(&fold.train, options.validation_fraction, seed)?;
        let model = trainer
            .fit(i, seed, &train, &validation)
            .map_err(|cause| CvError::Fold { fold: i, cause })?;
        let predicted = trainer
            .predict(&model, &fold.test)
            .map_err(|cause| CvError::Fold { fold: i, cause })?;
        let gold: Vec<usize> = fold.test.iter().map(|e| e.label).collect();
        let report = evaluate(&gold, &predicted, label_space)?;
        fold_scores.push(report.score(options.metric));
        fold_reports.push(report);
    }
    let n = fold_scores.len() as f64;
    let mean = fold_scores.iter().sum::<f64>() / n;
    let var = fold_scores
        .iter()
        .map(|s| (s - mean) * (s - mean))
        .sum::<f64>()
        / n;
    Ok(CrossValidation {
        metric: options.metric,
        fold_scores,
        fold_reports,
        mean,
        std_dev: math::sqrt(var),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use proptest::prelude::*;

    fn space(k: usize) -> LabelSpace {
        LabelSpace::new((0..k).map(|i| alloc::format!("L{i}")).collect()).unwrap()
    }

    #[test]
    fn perfect_prediction_is_identity_matrix() {
        let cm = confusion_matrix(&[0, 1, 2], &[0, 1, 2], &space(3)).unwrap();
        for g in 0..3 {
            for p in 0..3 {
                assert_eq!(cm.count(g, p), u64::from(g == p));
            }
        }
        let r = f1_report(&cm);
        assert_eq!(
            (r.macro_f1, r.micro_f1, r.weighted_f1, r.accuracy),
            (1.0, 1.0, 1.0, 1.0)
        );
    }

    #[test]
    fn hand_tally() {
        // A=0, B=1, C=2
        let gold = [0, 0, 1, 1, 2];
        let pred = [0, 1, 1, 1, 2];
        let cm = confusion_matrix(&gold, &pred, &space(3)).unwrap();
        assert_eq!(cm.count(0, 0), 1);
        assert_eq!(cm.count(0, 1), 1);
        assert_eq!(cm.count(1, 1), 2);
        assert_eq!(cm.count(2, 2), 1);
        assert_eq!(cm.total(), 5);
        let r = f1_report(&cm);
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[1].f1 - 0.8).abs() < 1e-12);
        assert!((r.per_class[2].f1 - 1.0).abs() < 1e-12);
        assert!((r.macro_f1 - 0.8222).abs() < 1e-4);
        assert!((r.weighted_f1 - 0.7867).abs() < 1e-4);
        assert!((r.micro_f1 - 0.8).abs() < 1e-12);
    }

    #[test]
    fn bad_inputs() {
        assert!(confusion_matrix(&[], &[], &space(2)).is_err());
        assert!(confusion_matrix(&[0], &[0, 1], &space(2)).is_err());
        assert!(confusion_matrix(&[0], &[2], &space(2)).is_err());
    }

    #[test]
    fn never_predicted_class_scores_zero() {
        let r = evaluate(&[0, 1, 2, 2], &[0, 1, 1, 0], &space(3)).unwrap();
        let c = &r.per_class[2];
        assert_eq!((c.precision, c.recall, c.f1, c.support), (0.0, 0.0, 0.0, 2));
    }

    #[test]
    fn absent_class_counts_in_macro() {
        let r = evaluate(&[0, 0], &[0, 0], &space(2)).unwrap();
        assert_eq!(r.macro_f1, 0.5);
        assert_eq!(r.weighted_f1, 1.0);
    }

    /// Independent per-class counter straight from the (gold, pred) pairs.
    fn brute_force(gold: &[usize], pred: &[usize], k: usize) -> (Vec<f64>, f64, f64, f64) {
        let mut f1s = Vec::new();
        let mut weighted = 0.0;
        for c in 0..k {
            let tp = gold
                .iter()
                .zip(pred)
                .filter(|(g, p)| **g == c && **p == c)
                .count() as f64;
            let fp = gold
                .iter()
                .zip(pred)
                .filter(|(g, p)| **g != c && **p == c)
                .count() as f64;
            let fn_ = gold
                .iter()
                .zip(pred)
                .filter(|(g, p)| **g == c && **p != c)
                .count() as f64;
            let prec = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
            let rec = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
            let f1 = if prec + rec > 0.0 {
                2.0 * prec * rec / (prec + rec)
            } else {
                0.0
            };
            weighted += f1 * (tp + fn_);
            f1s.push(f1);
        }
        let n = gold.len() as f64;
        let macro_ = f1s.iter().sum::<f64>() / k as f64;
        let acc = gold.iter().zip(pred).filter(|(g, p)| g == p).count() as f64 / n;
        (f1s, macro_, weighted / n, acc)
    }

    fn pairs() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
        (1usize..=6).prop_flat_map(|k| (Just(k), proptest::collection::vec((0..k, 0..k), 1..60)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(1000))]

        #[test]
        fn matches_brute_force((k, pairs) in pairs()) {
            let gold: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let r = evaluate(&gold, &pred, &space(k)).unwrap();
            let (f1s, macro_, weighted, acc) = brute_force(&gold, &pred, k);
            for (c, f) in r.per_class.iter().zip(&f1s) {
                prop_assert!((c.f1 - f).abs() < 1e-12);
            }
            prop_assert!((r.macro_f1 - macro_).abs() < 1e-12);
            prop_assert!((r.weighted_f1 - weighted).abs() < 1e-12);
            prop_assert_eq!(r.micro_f1, r.accuracy);
            prop_assert!((r.accuracy - acc).abs() < 1e-12);
            for v in [r.macro_f1, r.micro_f1, r.weighted_f1, r.accuracy] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
            prop_assert_eq!(r.per_class.iter().map(|c| c.support).sum::<u64>(), gold.len() as u64);
        }

        #[test]
        fn equal_supports_make_weighted_equal_macro(
            k in 1usize..=5,
            per_class in 1usize..8,
            preds in proptest::collection::vec(0usize..5, 40),
        ) {
            let gold: Vec<usize> = (0..k * per_class).map(|i| i % k).collect();
            let pred: Vec<usize> = gold.iter().enumerate().map(|(i, _)| preds[i % 40] % k).collect();
            let r = evaluate(&gold, &pred, &space(k)).unwrap();
            prop_assert!((r.weighted_f1 - r.macro_f1).abs() < 1e-12);
        }

        #[test]
        fn label_permutation_invariance((k, pairs) in pairs(), shift in 0usize..6) {
            let gold: Vec<usize> = pairs.iter().map(|p| p.0).collect();
            let pred: Vec<usize> = pairs.iter().map(|p| p.1).collect();
            let perm = |l: usize| (l + shift) % k;
            let r1 = evaluate(&gold, &pred, &space(k)).unwrap();
            let g2: Vec<usize> = gold.iter().map(|&l| perm(l)).collect();
            let p2: Vec<usize> = pred.iter().map(|&l| perm(l)).collect();
            let r2 = evaluate(&g2, &p2, &space(k)).unwrap();
            prop_assert!((r1.macro_f1 - r2.macro_f1).abs() < 1e-12);
            prop_assert!((r1.weighted_f1 - r2.weighted_f1).abs() < 1e-12);
            prop_assert_eq!(r1.micro_f1, r2.micro_f1);
            for c in 0..k {
                prop_assert!((r1.per_class[c].f1 - r2.per_class[perm(c)].f1).abs() < 1e-12);
            }
        }
    }

    struct Constant(usize);

    impl FoldTrainer for Constant {
        type Model = usize;
        type Error = String;

        fn fit(
            &mut self,
            _: usize,
            _: u64,
            train: &[LabeledExample],
            validation: &[LabeledExample],
        ) -> Result<usize, String> {
            if train.is_empty() || validation.is_empty() {
                return Err("empty".to_string());
            }
            Ok(self.0)
        }

        fn predict(&self, model: &usize, test: &[LabeledExample]) -> Result<Vec<usize>, String> {
            Ok(vec![*model; test.len()])
        }
    }

    fn balanced(n: usize) -> Vec<LabeledExample> {
        (0..n)
            .map(|i| LabeledExample {
                id: i,
                text: alloc::format!("t{i}"),
                label: i % 2,
            })
            .collect()
    }

    #[test]
    fn constant_predictor_macro_is_one_third() {
        let opts = CvOptions {
            seed: 3,
            ..CvOptions::default()
        };
        let cv = crossvalidate(&balanced(100), &space(2), &opts, &mut Constant(0)).unwrap();
        assert_eq!(cv.fold_scores.len(), 5);
        for s in &cv.fold_scores {
            assert!((s - 1.0 / 3.0).abs() < 1e-12);
        }
        assert!((cv.mean - 1.0 / 3.0).abs() < 1e-12);
        assert!(cv.std_dev < 1e-12);
    }

    #[test]
    fn fold_errors_carry_the_index() {
        struct Failing;
        impl FoldTrainer for Failing {
            type Model = ();
            type Error = &'static str;
            fn fit(
                &mut self,
                fold: usize,
                _: u64,
                _: &[LabeledExample],
                _: &[LabeledExample],
            ) -> Result<(), &'static str> {
                if fold == 2 {
                    Err("diverged")
                } else {
                    Ok(())
                }
            }
            fn predict(&self, _: &(), test: &[LabeledExample]) -> Result<Vec<usize>, &'static str> {
                Ok(vec![0; test.len()])
            }
        }
        let err = crossvalidate(
            &balanced(50),
            &space(2),
            &CvOptions::default(),
            &mut Failing,
        )
        .unwrap_err();
        assert_eq!(
            err,
            CvError::Fold {
                fold: 2,
                cause: "diverged"
            }
        );
    }

    #[test]
    fn k_one_is_rejected() {
        let opts = CvOptions {
            k: 1,
            ..CvOptions::default()
        };
        assert!(matches!(
            crossvalidate(&balanced(10), &space(2), &opts, &mut Constant(0)),
            Err(CvError::Corpus(CorpusError::Argument(_)))
        ));
    }
}
