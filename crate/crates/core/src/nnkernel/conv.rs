use alloc::vec::Vec;

use super::{check_sequence, shape_err, KernelError, Tensor};

/// Winning position per filter; `None` when the filter produced 0 (no valid
/// window, or the ReLU clipped the maximum) and so passes no gradient.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolCache {
    pub argmax: Vec<Option<usize>>,
    pub true_length: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvGrads {
    pub d_seq: Tensor,
    pub d_filters: Tensor,
    pub d_bias: Tensor,
}

fn filter_dims(
    seq: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
) -> Result<(usize, usize, usize), KernelError> {
    let fs = filters.shape();
    if fs.len() != 3 {
        return Err(shape_err("conv1d filters", fs, &[0, 0, 0]));
    }
    let (n, width, dim) = (fs[0], fs[1], fs[2]);
    if bias.shape() != [n] {
        return Err(shape_err("conv1d bias", fs, bias.shape()));
    }
    if seq.shape().len() != 2 || seq.shape()[1] != dim {
        return Err(shape_err("conv1d", seq.shape(), fs));
    }
    Ok((n, width, dim))
}

/// Convolution over time followed by ReLU and max-over-time pooling.
///
/// Only windows fully inside `[0, true_length)` are considered. A filter wider
/// than `true_length` yields 0.
pub fn conv1d_maxpool_forward(
    seq: &Tensor,
    filters: &Tensor,
    bias: &Tensor,
    true_length: usize,
) -> Result<(Tensor, PoolCache), KernelError> {
    let (n, width, dim) = filter_dims(seq, filters, bias)?;
    check_sequence("conv1d", seq, dim, true_length)?;
    let mut out = Tensor::zeros(&[n]);
    let mut argmax = alloc::vec![None; n];
    if width <= true_length {
        let positions = true_length - width + 1;
        let span = width * dim;
        #[allow(clippy::needless_range_loop)]
        for f in 0..n {
            let kernel = &filters.data()[f * span..(f + 1) * span];
            let mut best: Option<(usize, f64)> = None;
            for p in 0..positions {
                let window = &seq.data()[p * dim..p * dim + span];
                let z = bias.data()[f] + window.iter().zip(kernel).map(|(a, b)| a * b).sum::<f64>();
                // strict > keeps the first argmax on ties
                if best.is_none_or(|(_, b)| z > b) {
                    best = Some((p, z));
                }
            }
            if let Some((p, z)) = best {
                if z > 0.0 {
                    out.data_mut()[f] = z;
                    argmax[f] = Some(p);
                }
            }
        }
    }
    Ok((
        out,
        PoolCache {
            argmax,
            true_length,
        },
    ))
}

pub fn conv1d_maxpool_backward(
    seq: &Tensor,
    filters: &Tensor,
    cache: &PoolCache,
    grad_out: &Tensor,
) -> Result<ConvGrads, KernelError> {
    let fs = filters.shape();
    let (n, width, dim) = (fs[0], fs[1], fs[2]);
    if grad_out.shape() != [n] || cache.argmax.len() != n {
        return Err(shape_err("conv1d backward", grad_out.shape(), &[n]));
    }
    let span = width * dim;
    let mut d_seq = seq.zeros_like();
    let mut d_filters = filters.zeros_like();
    let mut d_bias = Tensor::zeros(&[n]);
    for (f, pos) in cache.argmax.iter().enumerate() {
        let Some(p) = *pos else { continue };
        let g = grad_out.data()[f];
        d_bias.data_mut()[f] += g;
        let window = &seq.data()[p * dim..p * dim + span];
        for (d, x) in d_filters.data_mut()[f * span..(f + 1) * span]
            .iter_mut()
            .zip(window)
        {
            *d += g * x;
        }
        let kernel = &filters.data()[f * span..(f + 1) * span];
        for (d, w) in d_seq.data_mut()[p * dim..p * dim + span]
            .iter_mut()
            .zip(kernel)
        {
            *d += g * w;
        }
    }
    Ok(ConvGrads {
        d_seq,
        d_filters,
        d_bias,
    })
}
