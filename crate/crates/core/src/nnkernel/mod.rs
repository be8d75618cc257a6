//! Dense f64 tensors and the hand-derived layers the classifiers are built from.
//!
//! Every layer has a forward function returning its output plus whatever the
//! backward pass needs, and a backward function that maps the gradient of the
//! output to gradients of the inputs and parameters. `gradcheck` compares the
//! backward passes against central finite differences.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng;

mod adam;
mod conv;
mod dense;
mod gradcheck;
mod gru;
mod loss;
mod lstm;
mod probe;

pub use adam::{AdamConfig, AdamState};
pub use conv::{conv1d_maxpool_backward, conv1d_maxpool_forward, ConvGrads, PoolCache};
pub use dense::{dense_backward, dense_forward, DenseGrads};
pub use gradcheck::{gradient_check, relative_error, GradCheck};
pub use gru::{gru_backward, gru_forward, GruCache, GruGrads, GruParams};
pub(crate) use loss::argmax;
pub use loss::{softmax_crossentropy, softmax_rows};
pub use lstm::{
    bilstm_backward, bilstm_forward, lstm_backward, lstm_forward, BiLstmCache, BiLstmGrads,
    LstmCache, LstmGrads, LstmParams,
};
pub use probe::{probe_layer, standard_cases, LayerCase, ProbeReport};

use crate::math;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KernelError {
    #[error("{op}: shape mismatch between {left:?} and {right:?}")]
    Shape {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("invalid argument: {0}")]
    Argument(String),
}

pub(crate) fn shape_err(op: &'static str, left: &[usize], right: &[usize]) -> KernelError {
    KernelError::Shape {
        op,
        left: left.to_vec(),
        right: right.to_vec(),
    }
}

/// Row-major dense tensor of f64.
#[derive(Debug, Clone, PartialEq)]
pub struct Tensor {
    shape: Vec<usize>,
    data: Vec<f64>,
}

impl Tensor {
    pub fn zeros(shape: &[usize]) -> Self {
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: vec![0.0; len],
        }
    }

    pub fn from_vec(shape: &[usize], data: Vec<f64>) -> Result<Self, KernelError> {
        if shape.contains(&0) {
            return Err(KernelError::Argument(alloc::format!(
                "tensor dimensions must be positive, got {shape:?}"
            )));
        }
        let len: usize = shape.iter().product();
        if len != data.len() {
            return Err(shape_err("from_vec", shape, &[data.len()]));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// Glorot-uniform init: `U(-a, a)` with `a = sqrt(6 / (fan_in + fan_out))`.
    pub fn glorot<R: Rng + ?Sized>(
        shape: &[usize],
        fan_in: usize,
        fan_out: usize,
        rng: &mut R,
    ) -> Self {
        let limit = math::sqrt(6.0 / (fan_in + fan_out) as f64);
        let len = shape.iter().product();
        Tensor {
            shape: shape.to_vec(),
            data: (0..len).map(|_| rng.gen_range(-limit..=limit)).collect(),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Row `i` of a tensor viewed as `(shape[0], rest)`.
    pub fn row(&self, i: usize) -> &[f64] {
        let width = self.data.len() / self.shape[0];
        &self.data[i * width..(i + 1) * width]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        let width = self.data.len() / self.shape[0];
        &mut self.data[i * width..(i + 1) * width]
    }

    pub fn zeros_like(&self) -> Self {
        Tensor::zeros(&self.shape)
    }

    /// Element-wise `self += other`; shapes must agree.
    pub fn add_assign(&mut self, other: &Tensor) -> Result<(), KernelError> {
        if self.shape != other.shape {
            return Err(shape_err("add_assign", &self.shape, &other.shape));
        }
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += b;
        }
        Ok(())
    }
}

// Small linear-algebra helpers shared by the layers. Matrices are row-major
// `(rows, cols)` slices.

/// `out += x · W` for a row vector `x` of length `rows`.
pub(crate) fn vec_mat_acc(x: &[f64], w: &[f64], cols: usize, out: &mut [f64]) {
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &w[k * cols..(k + 1) * cols];
        for (o, &wkj) in out.iter_mut().zip(row) {
            *o += xk * wkj;
        }
    }
}

/// `out += W · g`, i.e. the gradient of `x · W` with respect to `x`.
pub(crate) fn mat_vec_acc(w: &[f64], g: &[f64], cols: usize, out: &mut [f64]) {
    for (k, o) in out.iter_mut().enumerate() {
        let row = &w[k * cols..(k + 1) * cols];
        *o += row.iter().zip(g).map(|(a, b)| a * b).sum::<f64>();
    }
}

/// `dw += xᵀ · g` (outer product accumulation).
pub(crate) fn outer_acc(x: &[f64], g: &[f64], dw: &mut [f64]) {
    let cols = g.len();
    for (k, &xk) in x.iter().enumerate() {
        if xk == 0.0 {
            continue;
        }
        let row = &mut dw[k * cols..(k + 1) * cols];
        for (d, &gj) in row.iter_mut().zip(g) {
            *d += xk * gj;
        }
    }
}

pub(crate) fn check_shape(
    op: &'static str,
    t: &Tensor,
    expected: &[usize],
) -> Result<(), KernelError> {
    if t.shape() != expected {
        return Err(shape_err(op, t.shape(), expected));
    }
    Ok(())
}

/// Validates a `(max_len, dim)` sequence and `true_length <= max_len`.
pub(crate) fn check_sequence(
    op: &'static str,
    seq: &Tensor,
    dim: usize,
    true_length: usize,
) -> Result<(), KernelError> {
    if seq.shape().len() != 2 || seq.shape()[1] != dim {
        return Err(shape_err(op, seq.shape(), &[seq.shape()[0], dim]));
    }
    if true_length > seq.shape()[0] {
        return Err(KernelError::Argument(alloc::format!(
            "{op}: true_length {true_length} exceeds sequence length {}",
            seq.shape()[0]
        )));
    }
    Ok(())
}
