use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use votestack_core::corpus::{kfold_partitions, stratified_split};
use votestack_core::LabeledExample;

fn dataset(n: usize, classes: usize, rng: &mut ChaCha8Rng) -> Vec<LabeledExample> {
    (0..n)
        .map(|id| LabeledExample {
            id,
            text: format!("t{id}"),
            // the first `classes` examples guarantee every class appears
            label: if id < classes {
                id
            } else {
                rng.gen_range(0..classes)
            },
        })
        .collect()
}

fn class_counts(examples: &[LabeledExample], classes: usize) -> Vec<usize> {
    let mut c = vec![0; classes];
    examples.iter().for_each(|e| c[e.label] += 1);
    c
}

#[test]
fn kfold_contract_on_sizes_10_to_200() {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    for n in 10..=200 {
        let classes = rng.gen_range(1..=3);
        let data = dataset(n, classes, &mut rng);
        let per_class = class_counts(&data, classes);
        for k in [2, 3, 5] {
            for stratify in [true, false] {
                let seed = rng.gen();
                let folds = match kfold_partitions(&data, k, seed, stratify, None) {
                    Ok(f) => f,
                    Err(_) => {
                        assert!(stratify && per_class.iter().any(|&c| c < k));
                        continue;
                    }
                };
                assert_eq!(folds.len(), k);
                let mut ids: Vec<usize> = folds
                    .iter()
                    .flat_map(|f| f.test.iter().map(|e| e.id))
                    .collect();
                ids.sort_unstable();
                assert_eq!(ids, (0..n).collect::<Vec<_>>(), "disjoint and covering");
                for f in &folds {
                    let mut all: Vec<usize> = f.train.iter().chain(&f.test).map(|e| e.id).collect();
                    all.sort_unstable();
                    assert_eq!(all, (0..n).collect::<Vec<_>>());
                }
                let sizes: Vec<usize> = folds.iter().map(|f| f.test.len()).collect();
                assert!(sizes.iter().max().unwrap() - sizes.iter().min().unwrap() <= 1);
                if stratify {
                    for c in 0..classes {
                        let counts: Vec<usize> = folds
                            .iter()
                            .map(|f| class_counts(&f.test, classes)[c])
                            .collect();
                        assert!(
                            counts.iter().max().unwrap() - counts.iter().min().unwrap() <= 1,
                            "{counts:?}"
                        );
                    }
                }
                assert_eq!(
                    folds,
                    kfold_partitions(&data, k, seed, stratify, None).unwrap()
                );
            }
        }
    }
}

#[test]
fn split_proportions_within_one() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    for n in (12..=200).step_by(7) {
        let data = dataset(n, 3, &mut rng);
        let counts = class_counts(&data, 3);
        if counts.iter().any(|&c| c < 3) {
            continue;
        }
        let ratios = [0.7, 0.2, 0.1];
        let split = stratified_split(&data, ratios, n as u64, None).unwrap();
        for (part, r) in [&split.train, &split.validation, &split.test]
            .into_iter()
            .zip(ratios)
        {
            let got = class_counts(part, 3);
            for c in 0..3 {
                assert!(
                    (got[c] as f64 - r * counts[c] as f64).abs() < 1.0,
                    "n={n} class {c}"
                );
            }
        }
    }
}
