use alloc::vec::Vec;

use rand::Rng;

use super::{
    check_sequence, check_shape, mat_vec_acc, outer_acc, vec_mat_acc, KernelError, Tensor,
};
use crate::math::{sigmoid, tanh};

/// Standard LSTM gate parameters: input (`i`), forget (`f`), output (`o`) and
/// cell candidate (`c`). `w_*` are `(input_dim, hidden)`, `u_*` are
/// `(hidden, hidden)`, `b_*` are `(hidden)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LstmParams {
    pub w_i: Tensor,
    pub w_f: Tensor,
    pub w_o: Tensor,
    pub w_c: Tensor,
    pub u_i: Tensor,
    pub u_f: Tensor,
    pub u_o: Tensor,
    pub u_c: Tensor,
    pub b_i: Tensor,
    pub b_f: Tensor,
    pub b_o: Tensor,
    pub b_c: Tensor,
}

impl LstmParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[input_dim, hidden]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        LstmParams {
            w_i: w(),
            w_f: w(),
            w_o: w(),
            w_c: w(),
            u_i: u(),
            u_f: u(),
            u_o: u(),
            u_c: u(),
            b_i: b(),
            b_f: b(),
            b_o: b(),
            b_c: b(),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        for w in [&mut p.w_i, &mut p.w_f, &mut p.w_o, &mut p.w_c] {
            *w = Tensor::glorot(&[input_dim, hidden], input_dim, hidden, rng);
        }
        for u in [&mut p.u_i, &mut p.u_f, &mut p.u_o, &mut p.u_c] {
            *u = Tensor::glorot(&[hidden, hidden], hidden, hidden, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_i.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.b_i.shape()[0]
    }

    pub fn tensors(&self) -> [&Tensor; 12] {
        [
            &self.w_i, &self.w_f, &self.w_o, &self.w_c, &self.u_i, &self.u_f, &self.u_o, &self.u_c,
            &self.b_i, &self.b_f, &self.b_o, &self.b_c,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 12] {
        [
            &mut self.w_i,
            &mut self.w_f,
            &mut self.w_o,
            &mut self.w_c,
            &mut self.u_i,
            &mut self.u_f,
            &mut self.u_o,
            &mut self.u_c,
            &mut self.b_i,
            &mut self.b_f,
            &mut self.b_o,
            &mut self.b_c,
        ]
    }

    fn validate(&self) -> Result<(), KernelError> {
        let (d, h) = (self.input_dim(), self.hidden_size());
        for w in [&self.w_i, &self.w_f, &self.w_o, &self.w_c] {
            check_shape("lstm W", w, &[d, h])?;
        }
        for u in [&self.u_i, &self.u_f, &self.u_o, &self.u_c] {
            check_shape("lstm U", u, &[h, h])?;
        }
        for b in [&self.b_i, &self.b_f, &self.b_o, &self.b_c] {
            check_shape("lstm b", b, &[h])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct LstmStep {
    h_prev: Vec<f64>,
    c_prev: Vec<f64>,
    i: Vec<f64>,
    f: Vec<f64>,
    o: Vec<f64>,
    g: Vec<f64>,
    tanh_c: Vec<f64>,
}

/// Per-step activations kept for backpropagation through time.
#[derive(Debug, Clone)]
pub struct LstmCache {
    steps: Vec<LstmStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LstmGrads {
    pub params: LstmParams,
    pub d_seq: Tensor,
}

fn gate(x: &[f64], h: &[f64], w: &Tensor, u: &Tensor, b: &Tensor, act: fn(f64) -> f64) -> Vec<f64> {
    let hidden = b.len();
    let mut a = b.data().to_vec();
    vec_mat_acc(x, w.data(), hidden, &mut a);
    vec_mat_acc(h, u.data(), hidden, &mut a);
    a.iter_mut().for_each(|v| *v = act(*v));
    a
}

/// Runs the recurrence over the first `true_length` rows of `seq` from
/// `h_0 = c_0 = 0` and returns the last hidden state.
pub fn lstm_forward(
    seq: &Tensor,
    params: &LstmParams,
    true_length: usize,
) -> Result<(Tensor, LstmCache), KernelError> {
    params.validate()?;
    check_sequence("lstm", seq, params.input_dim(), true_length)?;
    let hidden = params.hidden_size();
    let mut h = alloc::vec![0.0; hidden];
    let mut c = alloc::vec![0.0; hidden];
    let mut steps = Vec::with_capacity(true_length);
    for t in 0..true_length {
        let x = seq.row(t);
        let i = gate(x, &h, &params.w_i, &params.u_i, &params.b_i, sigmoid);
        let f = gate(x, &h, &params.w_f, &params.u_f, &params.b_f, sigmoid);
        let o = gate(x, &h, &params.w_o, &params.u_o, &params.b_o, sigmoid);
        let g = gate(x, &h, &params.w_c, &params.u_c, &params.b_c, tanh);
        let c_next: Vec<f64> = (0..hidden).map(|k| f[k] * c[k] + i[k] * g[k]).collect();
        let tanh_c: Vec<f64> = c_next.iter().map(|v| tanh(*v)).collect();
        let h_next: Vec<f64> = (0..hidden).map(|k| o[k] * tanh_c[k]).collect();
        steps.push(LstmStep {
            h_prev: core::mem::replace(&mut h, h_next),
            c_prev: core::mem::replace(&mut c, c_next),
            i,
            f,
            o,
            g,
            tanh_c,
        });
    }
    Ok((Tensor::from_vec(&[hidden], h)?, LstmCache { steps }))
}

/// Backpropagation through time from the gradient of the final hidden state.
pub fn lstm_backward(
    seq: &Tensor,
    params: &LstmParams,
    cache: &LstmCache,
    grad_h: &Tensor,
) -> Result<LstmGrads, KernelError> {
    let (dim, hidden) = (params.input_dim(), params.hidden_size());
    check_shape("lstm backward", grad_h, &[hidden])?;
    let mut grads = LstmParams::zeros(dim, hidden);
    let mut d_seq = seq.zeros_like();
    let mut dh = grad_h.data().to_vec();
    let mut dc = alloc::vec![0.0; hidden];
    let mut da_i = alloc::vec![0.0; hidden];
    let mut da_f = alloc::vec![0.0; hidden];
    let mut da_o = alloc::vec![0.0; hidden];
    let mut da_g = alloc::vec![0.0; hidden];
    for (t, s) in cache.steps.iter().enumerate().rev() {
        for k in 0..hidden {
            let d_o = dh[k] * s.tanh_c[k];
            dc[k] += dh[k] * s.o[k] * (1.0 - s.tanh_c[k] * s.tanh_c[k]);
            let d_i = dc[k] * s.g[k];
            let d_g = dc[k] * s.i[k];
            let d_f = dc[k] * s.c_prev[k];
            da_i[k] = d_i * s.i[k] * (1.0 - s.i[k]);
            da_f[k] = d_f * s.f[k] * (1.0 - s.f[k]);
            da_o[k] = d_o * s.o[k] * (1.0 - s.o[k]);
            da_g[k] = d_g * (1.0 - s.g[k] * s.g[k]);
            dc[k] *= s.f[k];
        }
        let x = seq.row(t);
        let mut dh_prev = alloc::vec![0.0; hidden];
        let dx = d_seq.row_mut(t);
        for (da, w, u, dw, du, db) in [
            (
                &da_i,
                &params.w_i,
                &params.u_i,
                &mut grads.w_i,
                &mut grads.u_i,
                &mut grads.b_i,
            ),
            (
                &da_f,
                &params.w_f,
                &params.u_f,
                &mut grads.w_f,
                &mut grads.u_f,
                &mut grads.b_f,
            ),
            (
                &da_o,
                &params.w_o,
                &params.u_o,
                &mut grads.w_o,
                &mut grads.u_o,
                &mut grads.b_o,
            ),
            (
                &da_g,
                &params.w_c,
                &params.u_c,
                &mut grads.w_c,
                &mut grads.u_c,
                &mut grads.b_c,
            ),
        ] {
            outer_acc(x, da, dw.data_mut());
            outer_acc(&s.h_prev, da, du.data_mut());
            for (b, a) in db.data_mut().iter_mut().zip(da.iter()) {
                *b += a;
            }
            mat_vec_acc(w.data(), da, hidden, dx);
            mat_vec_acc(u.data(), da, hidden, &mut dh_prev);
        }
        dh = dh_prev;
    }
    Ok(LstmGrads {
        params: grads,
        d_seq,
    })
}

/// Caches of both directions plus the reversed input used by the backward one.
#[derive(Debug, Clone)]
pub struct BiLstmCache {
    forward: LstmCache,
    backward: LstmCache,
    reversed: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiLstmGrads {
    pub fwd: LstmParams,
    pub bwd: LstmParams,
    pub d_seq: Tensor,
}

fn reverse_prefix(seq: &Tensor, true_length: usize) -> Tensor {
    let mut reversed = seq.zeros_like();
    for t in 0..true_length {
        reversed
            .row_mut(t)
            .copy_from_slice(seq.row(true_length - 1 - t));
    }
    reversed
}

/// `[lstm(seq) ; lstm(reverse(seq[..true_length]))]`, length `2 * hidden`.
pub fn bilstm_forward(
    seq: &Tensor,
    fwd: &LstmParams,
    bwd: &LstmParams,
    true_length: usize,
) -> Result<(Tensor, BiLstmCache), KernelError> {
    let (h_f, forward) = lstm_forward(seq, fwd, true_length)?;
    let reversed = reverse_prefix(seq, true_length);
    let (h_b, backward) = lstm_forward(&reversed, bwd, true_length)?;
    let mut out = h_f.into_data();
    out.extend_from_slice(h_b.data());
    let len = out.len();
    Ok((
        Tensor::from_vec(&[len], out)?,
        BiLstmCache {
            forward,
            backward,
            reversed,
        },
    ))
}

pub fn bilstm_backward(
    seq: &Tensor,
    fwd: &LstmParams,
    bwd: &LstmParams,
    cache: &BiLstmCache,
    grad_out: &Tensor,
) -> Result<BiLstmGrads, KernelError> {
    let hf = fwd.hidden_size();
    let hb = bwd.hidden_size();
    check_shape("bilstm backward", grad_out, &[hf + hb])?;
    let g_f = Tensor::from_vec(&[hf], grad_out.data()[..hf].to_vec())?;
    let g_b = Tensor::from_vec(&[hb], grad_out.data()[hf..].to_vec())?;
    let a = lstm_backward(seq, fwd, &cache.forward, &g_f)?;
    let b = lstm_backward(&cache.reversed, bwd, &cache.backward, &g_b)?;
    let true_length = cache.backward.steps.len();
    let mut d_seq = a.d_seq;
    for t in 0..true_length {
        let src = b.d_seq.row(true_length - 1 - t).to_vec();
        for (d, s) in d_seq.row_mut(t).iter_mut().zip(src) {
            *d += s;
        }
    }
    Ok(BiLstmGrads {
        fwd: a.params,
        bwd: b.params,
        d_seq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn zero_params_give_zero_state() {
        let seq = Tensor::from_vec(&[3, 2], alloc::vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let (h, _) = lstm_forward(&seq, &LstmParams::zeros(2, 3), 3).unwrap();
        assert_eq!(h.data(), &[0.0; 3]);
    }

    #[test]
    fn hand_evaluated_single_step() {
        let mut p = LstmParams::zeros(1, 1);
        for t in p.tensors_mut().into_iter().take(8) {
            t.data_mut()[0] = 1.0;
        }
        let seq = Tensor::zeros(&[1, 1]);
        let (h, _) = lstm_forward(&seq, &p, 1).unwrap();
        let expected = sigmoid(0.0) * tanh(sigmoid(0.0) * tanh(0.0));
        assert_eq!(h.data(), &[expected]);
        assert_eq!(expected, 0.0);

        let seq = Tensor::from_vec(&[1, 1], alloc::vec![0.7]).unwrap();
        let (h, _) = lstm_forward(&seq, &p, 1).unwrap();
        let s = sigmoid(0.7);
        assert!((h.data()[0] - s * tanh(s * tanh(0.7))).abs() < 1e-15);
    }

    #[test]
    fn zero_length_is_zero_with_zero_grads() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let p = LstmParams::glorot(2, 3, &mut rng);
        let seq = Tensor::from_vec(&[2, 2], alloc::vec![1.0; 4]).unwrap();
        let (h, cache) = lstm_forward(&seq, &p, 0).unwrap();
        assert_eq!(h.data(), &[0.0; 3]);
        let g = lstm_backward(
            &seq,
            &p,
            &cache,
            &Tensor::from_vec(&[3], alloc::vec![1.0; 3]).unwrap(),
        )
        .unwrap();
        assert!(g
            .params
            .tensors()
            .iter()
            .all(|t| t.data().iter().all(|v| *v == 0.0)));
    }

    #[test]
    fn bilstm_zero_params() {
        let seq = Tensor::from_vec(&[2, 2], alloc::vec![1.0, 2.0, 3.0, 4.0]).unwrap();
        let z = LstmParams::zeros(2, 3);
        let (h, _) = bilstm_forward(&seq, &z, &z, 2).unwrap();
        assert_eq!(h.data(), &[0.0; 6]);
    }

    #[test]
    fn bilstm_palindrome_halves_match() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let p = LstmParams::glorot(2, 3, &mut rng);
        let seq = Tensor::from_vec(
            &[4, 2],
            alloc::vec![1.0, 2.0, -1.0, 0.5, 1.0, 2.0, 9.0, 9.0],
        )
        .unwrap();
        // rows 0..3 read (a, b, a): a palindrome; row 3 is padding
        let (h, _) = bilstm_forward(&seq, &p, &p, 3).unwrap();
        assert_eq!(h.data()[..3], h.data()[3..]);
    }

    #[test]
    fn shape_mismatch() {
        let seq = Tensor::zeros(&[2, 5]);
        assert!(matches!(
            lstm_forward(&seq, &LstmParams::zeros(2, 3), 2),
            Err(KernelError::Shape { .. })
        ));
    }
}
