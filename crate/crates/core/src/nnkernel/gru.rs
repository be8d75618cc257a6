use alloc::vec::Vec;

use rand::Rng;

use super::{
    check_sequence, check_shape, mat_vec_acc, outer_acc, vec_mat_acc, KernelError, Tensor,
};
use crate::math::{sigmoid, tanh};

/// GRU parameters for the reset (`r`) and update (`z`) gates and the
/// candidate (`h`).
///
/// Update convention: `h_t = (1 - z) ⊙ h_{t-1} + z ⊙ candidate`, with
/// `candidate = tanh(x W_h + (r ⊙ h_{t-1}) U_h + b_h)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GruParams {
    pub w_r: Tensor,
    pub w_z: Tensor,
    pub w_h: Tensor,
    pub u_r: Tensor,
    pub u_z: Tensor,
    pub u_h: Tensor,
    pub b_r: Tensor,
    pub b_z: Tensor,
    pub b_h: Tensor,
}

impl GruParams {
    pub fn zeros(input_dim: usize, hidden: usize) -> Self {
        let w = || Tensor::zeros(&[input_dim, hidden]);
        let u = || Tensor::zeros(&[hidden, hidden]);
        let b = || Tensor::zeros(&[hidden]);
        GruParams {
            w_r: w(),
            w_z: w(),
            w_h: w(),
            u_r: u(),
            u_z: u(),
            u_h: u(),
            b_r: b(),
            b_z: b(),
            b_h: b(),
        }
    }

    pub fn glorot<R: Rng + ?Sized>(input_dim: usize, hidden: usize, rng: &mut R) -> Self {
        let mut p = Self::zeros(input_dim, hidden);
        for w in [&mut p.w_r, &mut p.w_z, &mut p.w_h] {
            *w = Tensor::glorot(&[input_dim, hidden], input_dim, hidden, rng);
        }
        for u in [&mut p.u_r, &mut p.u_z, &mut p.u_h] {
            *u = Tensor::glorot(&[hidden, hidden], hidden, hidden, rng);
        }
        p
    }

    pub fn input_dim(&self) -> usize {
        self.w_r.shape()[0]
    }

    pub fn hidden_size(&self) -> usize {
        self.b_r.shape()[0]
    }

    pub fn tensors(&self) -> [&Tensor; 9] {
        [
            &self.w_r, &self.w_z, &self.w_h, &self.u_r, &self.u_z, &self.u_h, &self.b_r, &self.b_z,
            &self.b_h,
        ]
    }

    pub fn tensors_mut(&mut self) -> [&mut Tensor; 9] {
        [
            &mut self.w_r,
            &mut self.w_z,
            &mut self.w_h,
            &mut self.u_r,
            &mut self.u_z,
            &mut self.u_h,
            &mut self.b_r,
            &mut self.b_z,
            &mut self.b_h,
        ]
    }

    fn validate(&self) -> Result<(), KernelError> {
        let (d, h) = (self.input_dim(), self.hidden_size());
        for w in [&self.w_r, &self.w_z, &self.w_h] {
            check_shape("gru W", w, &[d, h])?;
        }
        for u in [&self.u_r, &self.u_z, &self.u_h] {
            check_shape("gru U", u, &[h, h])?;
        }
        for b in [&self.b_r, &self.b_z, &self.b_h] {
            check_shape("gru b", b, &[h])?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
struct GruStep {
    h_prev: Vec<f64>,
    r: Vec<f64>,
    z: Vec<f64>,
    n: Vec<f64>,
    rh: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct GruCache {
    steps: Vec<GruStep>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GruGrads {
    pub params: GruParams,
    pub d_seq: Tensor,
}

fn affine(x: &[f64], h: &[f64], w: &Tensor, u: &Tensor, b: &Tensor) -> Vec<f64> {
    let hidden = b.len();
    let mut a = b.data().to_vec();
    vec_mat_acc(x, w.data(), hidden, &mut a);
    vec_mat_acc(h, u.data(), hidden, &mut a);
    a
}

/// Runs the recurrence over the first `true_length` rows from `h_0 = 0`.
pub fn gru_forward(
    seq: &Tensor,
    params: &GruParams,
    true_length: usize,
) -> Result<(Tensor, GruCache), KernelError> {
    params.validate()?;
    check_sequence("gru", seq, params.input_dim(), true_length)?;
    let hidden = params.hidden_size();
    let mut h = alloc::vec![0.0; hidden];
    let mut steps = Vec::with_capacity(true_length);
    for t in 0..true_length {
        let x = seq.row(t);
        let mut r = affine(x, &h, &params.w_r, &params.u_r, &params.b_r);
        r.iter_mut().for_each(|v| *v = sigmoid(*v));
        let mut z = affine(x, &h, &params.w_z, &params.u_z, &params.b_z);
        z.iter_mut().for_each(|v| *v = sigmoid(*v));
        let rh: Vec<f64> = r.iter().zip(&h).map(|(a, b)| a * b).collect();
        let mut n = affine(x, &rh, &params.w_h, &params.u_h, &params.b_h);
        n.iter_mut().for_each(|v| *v = tanh(*v));
        let h_next: Vec<f64> = (0..hidden)
            .map(|k| (1.0 - z[k]) * h[k] + z[k] * n[k])
            .collect();
        steps.push(GruStep {
            h_prev: core::mem::replace(&mut h, h_next),
            r,
            z,
            n,
            rh,
        });
    }
    Ok((Tensor::from_vec(&[hidden], h)?, GruCache { steps }))
}

pub fn gru_backward(
    seq: &Tensor,
    params: &GruParams,
    cache: &GruCache,
    grad_h: &Tensor,
) -> Result<GruGrads, KernelError> {
    let (dim, hidden) = (params.input_dim(), params.hidden_size());
    check_shape("gru backward", grad_h, &[hidden])?;
    let mut grads = GruParams::zeros(dim, hidden);
    let mut d_seq = seq.zeros_like();
    let mut dh = grad_h.data().to_vec();
    let mut da_n = alloc::vec![0.0; hidden];
    let mut da_z = alloc::vec![0.0; hidden];
    let mut da_r = alloc::vec![0.0; hidden];
    for (t, s) in cache.steps.iter().enumerate().rev() {
        let x = seq.row(t);
        let mut dh_prev = alloc::vec![0.0; hidden];
        for k in 0..hidden {
            da_n[k] = dh[k] * s.z[k] * (1.0 - s.n[k] * s.n[k]);
            da_z[k] = dh[k] * (s.n[k] - s.h_prev[k]) * s.z[k] * (1.0 - s.z[k]);
            dh_prev[k] = dh[k] * (1.0 - s.z[k]);
        }
        // candidate path through r ⊙ h
        let mut d_rh = alloc::vec![0.0; hidden];
        mat_vec_acc(params.u_h.data(), &da_n, hidden, &mut d_rh);
        for k in 0..hidden {
            da_r[k] = d_rh[k] * s.h_prev[k] * s.r[k] * (1.0 - s.r[k]);
            dh_prev[k] += d_rh[k] * s.r[k];
        }
        outer_acc(x, &da_n, grads.w_h.data_mut());
        outer_acc(&s.rh, &da_n, grads.u_h.data_mut());
        outer_acc(x, &da_z, grads.w_z.data_mut());
        outer_acc(&s.h_prev, &da_z, grads.u_z.data_mut());
        outer_acc(x, &da_r, grads.w_r.data_mut());
        outer_acc(&s.h_prev, &da_r, grads.u_r.data_mut());
        for k in 0..hidden {
            grads.b_h.data_mut()[k] += da_n[k];
            grads.b_z.data_mut()[k] += da_z[k];
            grads.b_r.data_mut()[k] += da_r[k];
        }
        let dx = d_seq.row_mut(t);
        mat_vec_acc(params.w_h.data(), &da_n, hidden, dx);
        mat_vec_acc(params.w_z.data(), &da_z, hidden, dx);
        mat_vec_acc(params.w_r.data(), &da_r, hidden, dx);
        mat_vec_acc(params.u_z.data(), &da_z, hidden, &mut dh_prev);
        mat_vec_acc(params.u_r.data(), &da_r, hidden, &mut dh_prev);
        dh = dh_prev;
    }
    Ok(GruGrads {
        params: grads,
        d_seq,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_params_stay_at_zero() {
        let seq = Tensor::from_vec(&[3, 2], alloc::vec![1.0, -2.0, 0.5, 3.0, 4.0, -1.0]).unwrap();
        let (h, _) = gru_forward(&seq, &GruParams::zeros(2, 4), 3).unwrap();
        assert_eq!(h.data(), &[0.0; 4]);
    }

    #[test]
    fn closed_update_gate_after_warm_state() {
        // Hidden 1, input 1: first step writes state via x with z open, later
        // steps have z driven shut by a large negative input weight.
        let mut p = GruParams::zeros(1, 1);
        p.w_h.data_mut()[0] = 1.0;
        p.w_z.data_mut()[0] = -100.0;
        p.b_z.data_mut()[0] = 40.0;
        let seq = Tensor::from_vec(&[3, 1], alloc::vec![0.3, 1.0, 1.0]).unwrap();
        let (h1, _) = gru_forward(&seq, &p, 1).unwrap();
        let (h3, _) = gru_forward(&seq, &p, 3).unwrap();
        assert!(h1.data()[0] > 0.2);
        assert!((h3.data()[0] - h1.data()[0]).abs() < 1e-12);
    }

    #[test]
    fn zero_length() {
        let p = GruParams::zeros(2, 2);
        let seq = Tensor::zeros(&[2, 2]);
        let (h, cache) = gru_forward(&seq, &p, 0).unwrap();
        assert_eq!(h.data(), &[0.0; 2]);
        let g = gru_backward(
            &seq,
            &p,
            &cache,
            &Tensor::from_vec(&[2], alloc::vec![1.0, 1.0]).unwrap(),
        )
        .unwrap();
        assert!(g.d_seq.data().iter().all(|v| *v == 0.0));
    }
}
