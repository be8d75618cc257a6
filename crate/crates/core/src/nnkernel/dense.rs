use super::{mat_vec_acc, outer_acc, shape_err, vec_mat_acc, KernelError, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub d_input: Tensor,
    pub d_weight: Tensor,
    pub d_bias: Tensor,
}

fn dims(x: &Tensor, w: &Tensor) -> Result<(usize, usize, usize), KernelError> {
    let (xs, ws) = (x.shape(), w.shape());
    if xs.len() != 2 || ws.len() != 2 || xs[1] != ws[0] {
        return Err(shape_err("dense", xs, ws));
    }
    Ok((xs[0], xs[1], ws[1]))
}

/// `out[i, j] = Σ_k x[i, k] · W[k, j] + b[j]`.
pub fn dense_forward(x: &Tensor, w: &Tensor, b: &Tensor) -> Result<Tensor, KernelError> {
    let (batch, _, out_dim) = dims(x, w)?;
    if b.shape() != [out_dim] {
        return Err(shape_err("dense bias", w.shape(), b.shape()));
    }
    let mut out = Tensor::zeros(&[batch, out_dim]);
    for i in 0..batch {
        let row = out.row_mut(i);
        row.copy_from_slice(b.data());
        vec_mat_acc(x.row(i), w.data(), out_dim, row);
    }
    Ok(out)
}

pub fn dense_backward(
    x: &Tensor,
    w: &Tensor,
    grad_out: &Tensor,
) -> Result<DenseGrads, KernelError> {
    let (batch, in_dim, out_dim) = dims(x, w)?;
    if grad_out.shape() != [batch, out_dim] {
        return Err(shape_err(
            "dense backward",
            grad_out.shape(),
            &[batch, out_dim],
        ));
    }
    let mut d_input = Tensor::zeros(&[batch, in_dim]);
    let mut d_weight = Tensor::zeros(&[in_dim, out_dim]);
    let mut d_bias = Tensor::zeros(&[out_dim]);
    for i in 0..batch {
        let g = grad_out.row(i);
        mat_vec_acc(w.data(), g, out_dim, d_input.row_mut(i));
        outer_acc(x.row(i), g, d_weight.data_mut());
        for (db, gj) in d_bias.data_mut().iter_mut().zip(g) {
            *db += gj;
        }
    }
    Ok(DenseGrads {
        d_input,
        d_weight,
        d_bias,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn t(shape: &[usize], data: &[f64]) -> Tensor {
        Tensor::from_vec(shape, data.to_vec()).unwrap()
    }

    #[test]
    fn identity_weights() {
        let out = dense_forward(
            &t(&[1, 2], &[1.0, 2.0]),
            &t(&[2, 2], &[1.0, 0.0, 0.0, 1.0]),
            &t(&[2], &[0.0, 0.0]),
        )
        .unwrap();
        assert_eq!(out.data(), &[1.0, 2.0]);
    }

    #[test]
    fn hand_arithmetic() {
        let out = dense_forward(
            &t(&[1, 2], &[1.0, 1.0]),
            &t(&[2, 1], &[2.0, 3.0]),
            &t(&[1], &[1.0]),
        )
        .unwrap();
        assert_eq!(out.data(), &[6.0]);
    }

    #[test]
    fn backward_hand_values() {
        let x = t(&[1, 2], &[1.0, 1.0]);
        let w = t(&[2, 1], &[2.0, 3.0]);
        let g = dense_backward(&x, &w, &t(&[1, 1], &[1.0])).unwrap();
        assert_eq!(g.d_input.data(), &[2.0, 3.0]);
        assert_eq!(g.d_weight.data(), &[1.0, 1.0]);
        assert_eq!(g.d_bias.data(), &[1.0]);
    }

    #[test]
    fn shape_mismatch_lists_both_shapes() {
        let err = dense_forward(
            &t(&[1, 3], &[0.0; 3]),
            &t(&[2, 2], &[0.0; 4]),
            &t(&[2], &[0.0; 2]),
        )
        .unwrap_err();
        assert_eq!(
            err,
            KernelError::Shape {
                op: "dense",
                left: vec![1, 3],
                right: vec![2, 2]
            }
        );
        let msg = alloc::format!("{err}");
        assert!(msg.contains("[1, 3]") && msg.contains("[2, 2]"));
    }
}
