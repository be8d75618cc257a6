use alloc::vec::Vec;

use rand::Rng;

use super::{CellKind, ModelError, ModelSpec, Prediction};
use crate::embed::{EmbeddingTable, EncodedSequence};
use crate::nnkernel::{
    bilstm_backward, bilstm_forward, conv1d_maxpool_backward, conv1d_maxpool_forward, gru_backward,
    gru_forward, lstm_backward, lstm_forward, softmax_rows, BiLstmCache, GruCache, GruParams,
    KernelError, LstmCache, LstmParams, PoolCache, Tensor,
};

#[derive(Debug, Clone, PartialEq)]
struct ConvBlock {
    filters: Tensor,
    bias: Tensor,
}

// one per model, so variant size does not matter
#[allow(clippy::large_enum_variant)]
#[derive(Debug, Clone, PartialEq)]
enum Encoder {
    Cnn(Vec<ConvBlock>),
    Lstm(LstmParams),
    BiLstm(LstmParams, LstmParams),
    Gru(GruParams),
}

pub(crate) enum EncoderCache {
    Cnn(Vec<PoolCache>),
    Lstm(LstmCache),
    BiLstm(BiLstmCache),
    Gru(GruCache),
}

/// Sequence encoder followed by a dense softmax head. Dropout sits between
/// the two and is applied by the training loop only.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    encoder: Encoder,
    head_weight: Tensor,
    head_bias: Tensor,
}

/// Copies the embedding rows of `seq` into a `(max_len, dim)` tensor.
pub(crate) fn gather(table: &EmbeddingTable, seq: &EncodedSequence) -> Tensor {
    let dim = table.dim();
    let mut out = Tensor::zeros(&[seq.max_len(), dim]);
    for (t, &index) in seq.indices.iter().enumerate().take(seq.true_length) {
        out.row_mut(t).copy_from_slice(table.row(index));
    }
    out
}

fn feature_dim(spec: &ModelSpec) -> usize {
    match spec {
        ModelSpec::Cnn(c) => c.conv_blocks * c.filters_per_width,
        ModelSpec::Rnn(r) if r.bidirectional => 2 * r.hidden_size,
        ModelSpec::Rnn(r) => r.hidden_size,
    }
}

impl Network {
    fn build<R: Rng + ?Sized>(
        spec: &ModelSpec,
        input_dim: usize,
        classes: usize,
        mut init: Option<&mut R>,
    ) -> Self {
        let encoder = match spec {
            ModelSpec::Cnn(c) => Encoder::Cnn(
                c.widths()
                    .into_iter()
                    .map(|w| {
                        let shape = [c.filters_per_width, w, input_dim];
                        let filters = match init.as_deref_mut() {
                            Some(rng) => {
                                Tensor::glorot(&shape, w * input_dim, c.filters_per_width, rng)
                            }
                            None => Tensor::zeros(&shape),
                        };
                        ConvBlock {
                            filters,
                            bias: Tensor::zeros(&[c.filters_per_width]),
                        }
                    })
                    .collect(),
            ),
            ModelSpec::Rnn(r) => {
                let h = r.hidden_size;
                fn cell<R: Rng + ?Sized>(
                    input_dim: usize,
                    h: usize,
                    rng: Option<&mut R>,
                ) -> LstmParams {
                    match rng {
                        Some(rng) => LstmParams::glorot(input_dim, h, rng),
                        None => LstmParams::zeros(input_dim, h),
                    }
                }
                match (r.cell, r.bidirectional) {
                    (CellKind::Lstm, false) => {
                        Encoder::Lstm(cell(input_dim, h, init.as_deref_mut()))
                    }
                    (CellKind::Lstm, true) => {
                        let fwd = cell(input_dim, h, init.as_deref_mut());
                        let bwd = cell(input_dim, h, init.as_deref_mut());
                        Encoder::BiLstm(fwd, bwd)
                    }
                    (CellKind::Gru, _) => Encoder::Gru(match init.as_deref_mut() {
                        Some(rng) => GruParams::glorot(input_dim, r.hidden_size, rng),
                        None => GruParams::zeros(input_dim, r.hidden_size),
                    }),
                }
            }
        };
        let features = feature_dim(spec);
        let head_weight = match init {
            Some(rng) => Tensor::glorot(&[features, classes], features, classes, rng),
            None => Tensor::zeros(&[features, classes]),
        };
        Network {
            encoder,
            head_weight,
            head_bias: Tensor::zeros(&[classes]),
        }
    }

    /// Glorot-uniform weights and zero biases.
    pub fn init<R: Rng>(spec: &ModelSpec, input_dim: usize, classes: usize, rng: &mut R) -> Self {
        Self::build(spec, input_dim, classes, Some(rng))
    }

    pub fn zeros(spec: &ModelSpec, input_dim: usize, classes: usize) -> Self {
        Self::build::<rand_chacha::ChaCha8Rng>(spec, input_dim, classes, None)
    }

    pub fn zeros_like(&self) -> Self {
        let mut out = self.clone();
        for p in out.params_mut() {
            p.data_mut().iter_mut().for_each(|v| *v = 0.0);
        }
        out
    }

    pub fn input_dim(&self) -> usize {
        match &self.encoder {
            Encoder::Cnn(blocks) => blocks[0].filters.shape()[2],
            Encoder::Lstm(p) | Encoder::BiLstm(p, _) => p.input_dim(),
            Encoder::Gru(p) => p.input_dim(),
        }
    }

    /// Width of the encoder output that feeds the dense head.
    pub fn feature_dim(&self) -> usize {
        self.head_weight.shape()[0]
    }

    pub fn classes(&self) -> usize {
        self.head_bias.len()
    }

    pub fn head(&self) -> (&Tensor, &Tensor) {
        (&self.head_weight, &self.head_bias)
    }

    pub fn params(&self) -> Vec<&Tensor> {
        let mut out: Vec<&Tensor> = Vec::new();
        match &self.encoder {
            Encoder::Cnn(blocks) => {
                for b in blocks {
                    out.push(&b.filters);
                    out.push(&b.bias);
                }
            }
            Encoder::Lstm(p) => out.extend(p.tensors()),
            Encoder::BiLstm(f, b) => {
                out.extend(f.tensors());
                out.extend(b.tensors());
            }
            Encoder::Gru(p) => out.extend(p.tensors()),
        }
        out.push(&self.head_weight);
        out.push(&self.head_bias);
        out
    }

    pub fn params_mut(&mut self) -> Vec<&mut Tensor> {
        let mut out: Vec<&mut Tensor> = Vec::new();
        match &mut self.encoder {
            Encoder::Cnn(blocks) => {
                for b in blocks {
                    out.push(&mut b.filters);
                    out.push(&mut b.bias);
                }
            }
            Encoder::Lstm(p) => out.extend(p.tensors_mut()),
            Encoder::BiLstm(f, b) => {
                out.extend(f.tensors_mut());
                out.extend(b.tensors_mut());
            }
            Encoder::Gru(p) => out.extend(p.tensors_mut()),
        }
        out.push(&mut self.head_weight);
        out.push(&mut self.head_bias);
        out
    }

    pub(crate) fn encode(
        &self,
        seq: &Tensor,
        true_length: usize,
    ) -> Result<(Vec<f64>, EncoderCache), KernelError> {
        Ok(match &self.encoder {
            Encoder::Cnn(blocks) => {
                let mut features = Vec::with_capacity(self.feature_dim());
                let mut caches = Vec::with_capacity(blocks.len());
                for b in blocks {
                    let (out, cache) =
                        conv1d_maxpool_forward(seq, &b.filters, &b.bias, true_length)?;
                    features.extend_from_slice(out.data());
                    caches.push(cache);
                }
                (features, EncoderCache::Cnn(caches))
            }
            Encoder::Lstm(p) => {
                let (h, cache) = lstm_forward(seq, p, true_length)?;
                (h.into_data(), EncoderCache::Lstm(cache))
            }
            Encoder::BiLstm(f, b) => {
                let (h, cache) = bilstm_forward(seq, f, b, true_length)?;
                (h.into_data(), EncoderCache::BiLstm(cache))
            }
            Encoder::Gru(p) => {
                let (h, cache) = gru_forward(seq, p, true_length)?;
                (h.into_data(), EncoderCache::Gru(cache))
            }
        })
    }

    /// Accumulates encoder parameter gradients for one sequence into `grads`.
    pub(crate) fn encoder_backward(
        &self,
        seq: &Tensor,
        cache: &EncoderCache,
        d_features: &[f64],
        grads: &mut Network,
    ) -> Result<(), KernelError> {
        match (&self.encoder, cache, &mut grads.encoder) {
            (Encoder::Cnn(blocks), EncoderCache::Cnn(caches), Encoder::Cnn(g_blocks)) => {
                let mut offset = 0;
                for ((b, c), g) in blocks.iter().zip(caches).zip(g_blocks) {
                    let n = b.bias.len();
                    let d_out = Tensor::from_vec(&[n], d_features[offset..offset + n].to_vec())?;
                    offset += n;
                    let cg = conv1d_maxpool_backward(seq, &b.filters, c, &d_out)?;
                    g.filters.add_assign(&cg.d_filters)?;
                    g.bias.add_assign(&cg.d_bias)?;
                }
            }
            (Encoder::Lstm(p), EncoderCache::Lstm(c), Encoder::Lstm(g)) => {
                let d_h = Tensor::from_vec(&[d_features.len()], d_features.to_vec())?;
                let lg = lstm_backward(seq, p, c, &d_h)?;
                for (acc, d) in g.tensors_mut().into_iter().zip(lg.params.tensors()) {
                    acc.add_assign(d)?;
                }
            }
            (Encoder::BiLstm(f, b), EncoderCache::BiLstm(c), Encoder::BiLstm(gf, gb)) => {
                let d_h = Tensor::from_vec(&[d_features.len()], d_features.to_vec())?;
                let bg = bilstm_backward(seq, f, b, c, &d_h)?;
                for (acc, d) in gf.tensors_mut().into_iter().zip(bg.fwd.tensors()) {
                    acc.add_assign(d)?;
                }
                for (acc, d) in gb.tensors_mut().into_iter().zip(bg.bwd.tensors()) {
                    acc.add_assign(d)?;
                }
            }
            (Encoder::Gru(p), EncoderCache::Gru(c), Encoder::Gru(g)) => {
                let d_h = Tensor::from_vec(&[d_features.len()], d_features.to_vec())?;
                let gg = gru_backward(seq, p, c, &d_h)?;
                for (acc, d) in g.tensors_mut().into_iter().zip(gg.params.tensors()) {
                    acc.add_assign(d)?;
                }
            }
            _ => {
                return Err(KernelError::Argument(
                    "encoder, cache and gradient kinds disagree".into(),
                ))
            }
        }
        Ok(())
    }

    pub(crate) fn add_head_grads(
        &mut self,
        d_weight: &Tensor,
        d_bias: &Tensor,
    ) -> Result<(), KernelError> {
        self.head_weight.add_assign(d_weight)?;
        self.head_bias.add_assign(d_bias)
    }

    pub(crate) fn logits(&self, features: &[f64]) -> Vec<f64> {
        let classes = self.classes();
        let mut logits = self.head_bias.data().to_vec();
        crate::nnkernel::vec_mat_acc(features, self.head_weight.data(), classes, &mut logits);
        logits
    }

    pub(crate) fn predict(
        &self,
        table: &EmbeddingTable,
        seq: &EncodedSequence,
    ) -> Result<Prediction, ModelError> {
        if table.dim() != self.input_dim() {
            return Err(ModelError::Config(alloc::format!(
                "embedding dim {} does not match model input dim {}",
                table.dim(),
                self.input_dim()
            )));
        }
        let x = gather(table, seq);
        let (features, _) = self.encode(&x, seq.true_length)?;
        let logits = self.logits(&features);
        let probs = softmax_rows(&Tensor::from_vec(&[1, logits.len()], logits)?).into_data();
        Ok(Prediction {
            label: crate::nnkernel::argmax(&probs),
            probabilities: probs,
        })
    }
}
