use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{
    bilstm_backward, bilstm_forward, conv1d_maxpool_backward, conv1d_maxpool_forward,
    dense_backward, dense_forward, gradient_check, gru_backward, gru_forward, lstm_backward,
    lstm_forward, GruParams, KernelError, LstmParams, Tensor,
};

/// A layer with concrete dimensions to be checked against finite differences.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LayerCase {
    Dense {
        batch: usize,
        input: usize,
        output: usize,
    },
    Conv {
        len: usize,
        dim: usize,
        filters: usize,
        width: usize,
        true_length: usize,
    },
    Lstm {
        len: usize,
        dim: usize,
        hidden: usize,
        true_length: usize,
    },
    BiLstm {
        len: usize,
        dim: usize,
        hidden: usize,
        true_length: usize,
    },
    Gru {
        len: usize,
        dim: usize,
        hidden: usize,
        true_length: usize,
    },
}

/// Largest relative error found by a probe, over every input and parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeReport {
    pub case: LayerCase,
    pub seed: u64,
    pub max_relative_error: f64,
    pub coordinates: usize,
}

fn uniform<R: Rng>(shape: &[usize], scale: f64, rng: &mut R) -> Tensor {
    let n = shape.iter().product();
    let data = (0..n).map(|_| rng.gen_range(-scale..scale)).collect();
    Tensor::from_vec(shape, data).expect("positive dims")
}

fn weighted_sum(out: &Tensor, weights: &Tensor) -> f64 {
    out.data()
        .iter()
        .zip(weights.data())
        .map(|(a, b)| a * b)
        .sum()
}

/// Runs `gradient_check` on each tensor in turn while the others stay fixed.
fn check_each<F>(tensors: &[Tensor], analytic: &[&Tensor], step: f64, eval: F) -> (f64, usize)
where
    F: Fn(&[Tensor]) -> f64,
{
    let mut worst: f64 = 0.0;
    let mut coordinates = 0;
    for (k, grad) in analytic.iter().enumerate() {
        let mut work = tensors.to_vec();
        let r = gradient_check(
            |p| {
                work[k].data_mut().copy_from_slice(p);
                eval(&work)
            },
            tensors[k].data(),
            grad.data(),
            step,
        );
        coordinates += grad.len();
        worst = worst.max(r.max_relative_error);
    }
    (worst, coordinates)
}

fn random_lstm<R: Rng>(dim: usize, hidden: usize, rng: &mut R) -> LstmParams {
    let mut p = LstmParams::glorot(dim, hidden, rng);
    for b in [&mut p.b_i, &mut p.b_f, &mut p.b_o, &mut p.b_c] {
        *b = uniform(&[hidden], 0.5, rng);
    }
    p
}

fn lstm_from(template: &LstmParams, ts: &[Tensor]) -> LstmParams {
    let mut p = template.clone();
    for (dst, src) in p.tensors_mut().into_iter().zip(ts) {
        *dst = src.clone();
    }
    p
}

fn gru_from(template: &GruParams, ts: &[Tensor]) -> GruParams {
    let mut p = template.clone();
    for (dst, src) in p.tensors_mut().into_iter().zip(ts) {
        *dst = src.clone();
    }
    p
}

/// Draws random inputs and parameters for `case` from `seed`, backpropagates
/// a random weighted sum of the layer outputs, and compares every gradient
/// coordinate with central differences of step `step`.
pub fn probe_layer(case: LayerCase, seed: u64, step: f64) -> Result<ProbeReport, KernelError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let nan = |r: Result<f64, KernelError>| r.unwrap_or(f64::NAN);
    let (max_relative_error, coordinates) = match case {
        LayerCase::Dense {
            batch,
            input,
            output,
        } => {
            let x = uniform(&[batch, input], 1.0, &mut rng);
            let w = uniform(&[input, output], 1.0, &mut rng);
            let b = uniform(&[output], 1.0, &mut rng);
            let c = uniform(&[batch, output], 1.0, &mut rng);
            let g = dense_backward(&x, &w, &c)?;
            check_each(
                &[x, w, b],
                &[&g.d_input, &g.d_weight, &g.d_bias],
                step,
                |t| nan(dense_forward(&t[0], &t[1], &t[2]).map(|o| weighted_sum(&o, &c))),
            )
        }
        LayerCase::Conv {
            len,
            dim,
            filters,
            width,
            true_length,
        } => {
            let seq = uniform(&[len, dim], 1.0, &mut rng);
            let f = uniform(&[filters, width, dim], 1.0, &mut rng);
            let b = uniform(&[filters], 0.5, &mut rng);
            let c = uniform(&[filters], 1.0, &mut rng);
            let (_, cache) = conv1d_maxpool_forward(&seq, &f, &b, true_length)?;
            let g = conv1d_maxpool_backward(&seq, &f, &cache, &c)?;
            check_each(
                &[seq, f, b],
                &[&g.d_seq, &g.d_filters, &g.d_bias],
                step,
                |t| {
                    nan(conv1d_maxpool_forward(&t[0], &t[1], &t[2], true_length)
                        .map(|(o, _)| weighted_sum(&o, &c)))
                },
            )
        }
        LayerCase::Lstm {
            len,
            dim,
            hidden,
            true_length,
        } => {
            let seq = uniform(&[len, dim], 1.0, &mut rng);
            let p = random_lstm(dim, hidden, &mut rng);
            let c = uniform(&[hidden], 1.0, &mut rng);
            let (_, cache) = lstm_forward(&seq, &p, true_length)?;
            let g = lstm_backward(&seq, &p, &cache, &c)?;
            let mut tensors = vec![seq];
            tensors.extend(p.tensors().into_iter().cloned());
            let mut analytic = vec![&g.d_seq];
            analytic.extend(g.params.tensors());
            check_each(&tensors, &analytic, step, |t| {
                let q = lstm_from(&p, &t[1..]);
                nan(lstm_forward(&t[0], &q, true_length).map(|(o, _)| weighted_sum(&o, &c)))
            })
        }
        LayerCase::BiLstm {
            len,
            dim,
            hidden,
            true_length,
        } => {
            let seq = uniform(&[len, dim], 1.0, &mut rng);
            let fwd = random_lstm(dim, hidden, &mut rng);
            let bwd = random_lstm(dim, hidden, &mut rng);
            let c = uniform(&[2 * hidden], 1.0, &mut rng);
            let (_, cache) = bilstm_forward(&seq, &fwd, &bwd, true_length)?;
            let g = bilstm_backward(&seq, &fwd, &bwd, &cache, &c)?;
            let mut tensors = vec![seq];
            tensors.extend(fwd.tensors().into_iter().cloned());
            tensors.extend(bwd.tensors().into_iter().cloned());
            let mut analytic = vec![&g.d_seq];
            analytic.extend(g.fwd.tensors());
            analytic.extend(g.bwd.tensors());
            check_each(&tensors, &analytic, step, |t| {
                let f = lstm_from(&fwd, &t[1..13]);
                let b = lstm_from(&bwd, &t[13..]);
                nan(bilstm_forward(&t[0], &f, &b, true_length).map(|(o, _)| weighted_sum(&o, &c)))
            })
        }
        LayerCase::Gru {
            len,
            dim,
            hidden,
            true_length,
        } => {
            let seq = uniform(&[len, dim], 1.0, &mut rng);
            let mut p = GruParams::glorot(dim, hidden, &mut rng);
            for b in [&mut p.b_r, &mut p.b_z, &mut p.b_h] {
                *b = uniform(&[hidden], 0.5, &mut rng);
            }
            let c = uniform(&[hidden], 1.0, &mut rng);
            let (_, cache) = gru_forward(&seq, &p, true_length)?;
            let g = gru_backward(&seq, &p, &cache, &c)?;
            let mut tensors = vec![seq];
            tensors.extend(p.tensors().into_iter().cloned());
            let mut analytic = vec![&g.d_seq];
            analytic.extend(g.params.tensors());
            check_each(&tensors, &analytic, step, |t| {
                let q = gru_from(&p, &t[1..]);
                nan(gru_forward(&t[0], &q, true_length).map(|(o, _)| weighted_sum(&o, &c)))
            })
        }
    };
    Ok(ProbeReport {
        case,
        seed,
        max_relative_error,
        coordinates,
    })
}

/// Three shapes per layer family, covering padding, length one and wider
/// hidden states.
pub fn standard_cases() -> Vec<LayerCase> {
    vec![
        LayerCase::Dense {
            batch: 1,
            input: 2,
            output: 2,
        },
        LayerCase::Dense {
            batch: 3,
            input: 4,
            output: 2,
        },
        LayerCase::Dense {
            batch: 5,
            input: 3,
            output: 6,
        },
        LayerCase::Conv {
            len: 5,
            dim: 4,
            filters: 3,
            width: 2,
            true_length: 5,
        },
        LayerCase::Conv {
            len: 7,
            dim: 3,
            filters: 4,
            width: 3,
            true_length: 5,
        },
        LayerCase::Conv {
            len: 6,
            dim: 2,
            filters: 2,
            width: 1,
            true_length: 6,
        },
        LayerCase::Lstm {
            len: 4,
            dim: 3,
            hidden: 2,
            true_length: 4,
        },
        LayerCase::Lstm {
            len: 6,
            dim: 2,
            hidden: 3,
            true_length: 3,
        },
        LayerCase::Lstm {
            len: 3,
            dim: 4,
            hidden: 4,
            true_length: 1,
        },
        LayerCase::BiLstm {
            len: 4,
            dim: 3,
            hidden: 2,
            true_length: 4,
        },
        LayerCase::BiLstm {
            len: 6,
            dim: 2,
            hidden: 3,
            true_length: 4,
        },
        LayerCase::BiLstm {
            len: 3,
            dim: 2,
            hidden: 2,
            true_length: 1,
        },
        LayerCase::Gru {
            len: 4,
            dim: 3,
            hidden: 2,
            true_length: 4,
        },
        LayerCase::Gru {
            len: 6,
            dim: 2,
            hidden: 3,
            true_length: 3,
        },
        LayerCase::Gru {
            len: 3,
            dim: 4,
            hidden: 4,
            true_length: 1,
        },
    ]
}
