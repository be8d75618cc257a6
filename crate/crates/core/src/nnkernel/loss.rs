use super::{KernelError, Tensor};
use crate::math::{exp, ln};

/// Row-wise softmax with the row maximum subtracted first.
pub fn softmax_rows(logits: &Tensor) -> Tensor {
    let mut out = logits.clone();
    let rows = logits.shape()[0];
    for i in 0..rows {
        let row = out.row_mut(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        for v in row.iter_mut() {
            *v = exp(*v - max);
            sum += *v;
        }
        row.iter_mut().for_each(|v| *v /= sum);
    }
    out
}

/// Mean cross-entropy of `softmax(logits)` against `targets`, and its
/// gradient `(softmax - one_hot) / batch`.
pub fn softmax_crossentropy(
    logits: &Tensor,
    targets: &[usize],
) -> Result<(f64, Tensor), KernelError> {
    let shape = logits.shape();
    if shape.len() != 2 || shape[0] != targets.len() {
        return Err(super::shape_err(
            "softmax_crossentropy",
            shape,
            &[targets.len()],
        ));
    }
    let (batch, k) = (shape[0], shape[1]);
    if let Some(bad) = targets.iter().find(|&&t| t >= k) {
        return Err(KernelError::Argument(alloc::format!(
            "target {bad} out of range for {k} classes"
        )));
    }
    let mut grad = softmax_rows(logits);
    let mut loss = 0.0;
    for (i, &target) in targets.iter().enumerate() {
        let row = logits.row(i);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let log_sum: f64 = ln(row.iter().map(|v| exp(v - max)).sum::<f64>()) + max;
        loss += log_sum - row[target];
        let g = grad.row_mut(i);
        g[target] -= 1.0;
        g.iter_mut().for_each(|v| *v /= batch as f64);
    }
    Ok((loss / batch as f64, grad))
}

/// Index of the largest value; the lowest index wins ties.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn uniform_logits() {
        let logits = Tensor::zeros(&[1, 3]);
        let (loss, grad) = softmax_crossentropy(&logits, &[0]).unwrap();
        assert!((loss - 3f64.ln()).abs() < 1e-12);
        let third = 1.0 / 3.0;
        let expected = [third - 1.0, third, third];
        for (g, e) in grad.data().iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
    }

    #[test]
    fn large_logits_do_not_overflow() {
        let logits = Tensor::from_vec(&[1, 2], vec![1000.0, 0.0]).unwrap();
        let (loss, grad) = softmax_crossentropy(&logits, &[0]).unwrap();
        assert!(loss.is_finite() && loss.abs() < 1e-12);
        assert!(grad.is_finite());
    }

    #[test]
    fn target_out_of_range() {
        let logits = Tensor::zeros(&[1, 2]);
        assert!(matches!(
            softmax_crossentropy(&logits, &[2]),
            Err(KernelError::Argument(_))
        ));
    }

    #[test]
    fn argmax_prefers_lowest_index() {
        assert_eq!(argmax(&[0.2, 0.4, 0.4]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
