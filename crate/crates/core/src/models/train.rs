use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::network::{gather, Network};
use super::{EpochRecord, ModelError, ModelSpec, TrainConfig, TrainedClassifier, DIVERGENCE_LOSS};
use crate::corpus::{LabelSpace, LabeledExample};
use crate::embed::EmbeddingTable;
use crate::evalkit::{evaluate, FoldTrainer};
use crate::nnkernel::{
    dense_backward, dense_forward, softmax_crossentropy, AdamConfig, AdamState, Tensor,
};
use crate::pipeline::{LabeledBatch, Pipeline};

fn check_batch(name: &str, data: &LabeledBatch, classes: usize) -> Result<(), ModelError> {
    if data.batch.is_empty() {
        return Err(ModelError::Config(alloc::format!("{name} set is empty")));
    }
    if data.labels.len() != data.batch.len() {
        return Err(ModelError::Config(alloc::format!(
            "{name} set has {} sequences but {} labels",
            data.batch.len(),
            data.labels.len()
        )));
    }
    if let Some(l) = data.labels.iter().find(|&&l| l >= classes) {
        return Err(ModelError::Config(alloc::format!(
            "{name} label {l} outside label space of {classes}"
        )));
    }
    Ok(())
}

/// Trains with shuffled mini-batches and Adam. After every epoch the
/// validation metric is computed; the parameters of the best epoch are kept
/// and training stops once `early_stop_patience` epochs pass without
/// improvement. All randomness (init, shuffling, dropout) derives from
/// `config.seed`.
pub fn train_classifier(
    train: &LabeledBatch,
    validation: &LabeledBatch,
    spec: &ModelSpec,
    config: &TrainConfig,
    table: &EmbeddingTable,
    label_space: &LabelSpace,
) -> Result<TrainedClassifier, ModelError> {
    let classes = label_space.len();
    config.validate()?;
    check_batch("training", train, classes)?;
    check_batch("validation", validation, classes)?;
    let fingerprint = train.batch.fingerprint.clone();
    if validation.batch.fingerprint != fingerprint {
        return Err(ModelError::FingerprintMismatch {
            expected: fingerprint.into(),
            found: validation.batch.fingerprint.clone().into(),
        });
    }
    if table.content_hash() != fingerprint.embedding_hash {
        return Err(ModelError::Config(
            "embedding table differs from the one used for encoding".into(),
        ));
    }
    spec.validate(fingerprint.max_len)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut network = Network::init(spec, table.dim(), classes, &mut rng);
    let mut adam = AdamState::new(AdamConfig::with_lr(config.lr), &network.params());
    let dropout = spec.dropout();
    let inputs: Vec<Tensor> = train
        .batch
        .sequences
        .iter()
        .map(|s| gather(table, s))
        .collect();

    let mut classifier = TrainedClassifier::neural(
        spec.clone(),
        network.clone(),
        fingerprint,
        label_space.clone(),
        Vec::new(),
    );
    let mut history = Vec::new();
    let mut best_score = f64::NEG_INFINITY;
    let mut best_network = network.clone();
    let mut stale = 0;
    let mut order: Vec<usize> = (0..train.batch.len()).collect();

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for chunk in order.chunks(config.batch_size) {
            let mut grads = network.zeros_like();
            let feature_dim = network.feature_dim();
            let mut features = Tensor::zeros(&[chunk.len(), feature_dim]);
            let mut caches = Vec::with_capacity(chunk.len());
            let mut masks = Vec::with_capacity(chunk.len());
            for (row, &i) in chunk.iter().enumerate() {
                let (f, cache) =
                    network.encode(&inputs[i], train.batch.sequences[i].true_length)?;
                let mask: Vec<f64> = (0..feature_dim)
                    .map(|_| {
                        if dropout == 0.0 {
                            1.0
                        } else if rng.gen::<f64>() < dropout {
                            0.0
                        } else {
                            1.0 / (1.0 - dropout)
                        }
                    })
                    .collect();
                for ((dst, v), m) in features.row_mut(row).iter_mut().zip(&f).zip(&mask) {
                    *dst = v * m;
                }
                caches.push(cache);
                masks.push(mask);
            }
            let (head_w, head_b) = network.head();
            let logits = dense_forward(&features, head_w, head_b)?;
            let targets: Vec<usize> = chunk.iter().map(|&i| train.labels[i]).collect();
            let (loss, d_logits) = softmax_crossentropy(&logits, &targets)?;
            if !loss.is_finite() || loss > DIVERGENCE_LOSS {
                return Err(ModelError::Divergence { epoch, loss });
            }
            loss_sum += loss * chunk.len() as f64;
            let dense = dense_backward(&features, head_w, &d_logits)?;
            grads.add_head_grads(&dense.d_weight, &dense.d_bias)?;
            for (row, &i) in chunk.iter().enumerate() {
                let d_feat: Vec<f64> = dense
                    .d_input
                    .row(row)
                    .iter()
                    .zip(&masks[row])
                    .map(|(g, m)| g * m)
                    .collect();
                network.encoder_backward(&inputs[i], &caches[row], &d_feat, &mut grads)?;
            }
            let grad_refs = grads.params();
            adam.step(&mut network.params_mut(), &grad_refs)?;
            if network.params().iter().any(|p| !p.is_finite()) {
                return Err(ModelError::Divergence {
                    epoch,
                    loss: f64::NAN,
                });
            }
        }
        let train_loss = loss_sum / train.batch.len() as f64;

        classifier.set_network(network.clone());
        let predicted = classifier.predict_labels(table, &validation.batch)?;
        let score =
            evaluate(&validation.labels, &predicted, label_space)?.score(config.validation_metric);
        history.push(EpochRecord {
            epoch,
            train_loss,
            validation_score: score,
        });
        if score > best_score {
            best_score = score;
            best_network = network.clone();
            stale = 0;
        } else {
            stale += 1;
            if stale >= config.early_stop_patience {
                break;
            }
        }
    }
    classifier.set_network(best_network);
    classifier.history = history;
    Ok(classifier)
}

impl TrainedClassifier {
    fn set_network(&mut self, new: Network) {
        if let super::Body::Neural { network, .. } = &mut self.body {
            *network = new;
        }
    }
}

/// Cross-validation adapter: encodes each fold with a shared pipeline and
/// trains one neural model per fold with seed `seed + fold`.
pub struct NeuralFoldTrainer<'a> {
    pub pipeline: &'a Pipeline,
    pub spec: ModelSpec,
    pub config: TrainConfig,
    pub label_space: LabelSpace,
}

impl FoldTrainer for NeuralFoldTrainer<'_> {
    type Model = TrainedClassifier;
    type Error = ModelError;

    fn fit(
        &mut self,
        _fold: usize,
        seed: u64,
        train: &[LabeledExample],
        validation: &[LabeledExample],
    ) -> Result<TrainedClassifier, ModelError> {
        let config = TrainConfig {
            seed,
            ..self.config.clone()
        };
        let train = self.pipeline.encode(train)?;
        let validation = self.pipeline.encode(validation)?;
        train_classifier(
            &train,
            &validation,
            &self.spec,
            &config,
            &self.pipeline.table,
            &self.label_space,
        )
    }

    fn predict(
        &self,
        model: &TrainedClassifier,
        test: &[LabeledExample],
    ) -> Result<Vec<usize>, ModelError> {
        let encoded = self.pipeline.encode(test)?;
        model.predict_labels(&self.pipeline.table, &encoded.batch)
    }
}
