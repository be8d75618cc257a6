use alloc::vec::Vec;

use crate::math::abs;

/// Outcome of comparing analytic gradients to central differences.
#[derive(Debug, Clone, PartialEq)]
pub struct GradCheck {
    pub max_relative_error: f64,
    /// Coordinate with the largest error, if any coordinate was checked.
    pub worst_index: Option<usize>,
    pub numeric: Vec<f64>,
}

impl GradCheck {
    pub fn passes(&self, tolerance: f64) -> bool {
        self.max_relative_error < tolerance
    }
}

/// `|a - n| / max(|a|, |n|, 1e-8)`.
pub fn relative_error(analytic: f64, numeric: f64) -> f64 {
    abs(analytic - numeric) / abs(analytic).max(abs(numeric)).max(1e-8)
}

/// Compares `analytic` with `(f(θ + h·e_i) - f(θ - h·e_i)) / 2h` for every
/// coordinate `i` of `point`. `loss` must be deterministic.
pub fn gradient_check<F>(mut loss: F, point: &[f64], analytic: &[f64], step: f64) -> GradCheck
where
    F: FnMut(&[f64]) -> f64,
{
    assert_eq!(
        point.len(),
        analytic.len(),
        "gradient length must match parameter count"
    );
    let mut theta = point.to_vec();
    let mut numeric = Vec::with_capacity(point.len());
    let mut worst = (0.0, None);
    for i in 0..theta.len() {
        let original = theta[i];
        theta[i] = original + step;
        let plus = loss(&theta);
        theta[i] = original - step;
        let minus = loss(&theta);
        theta[i] = original;
        let n = (plus - minus) / (2.0 * step);
        let err = relative_error(analytic[i], n);
        if worst.1.is_none() || err > worst.0 {
            worst = (err, Some(i));
        }
        numeric.push(n);
    }
    GradCheck {
        max_relative_error: worst.0,
        worst_index: worst.1,
        numeric,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_gradient_of_quadratic() {
        let f = |x: &[f64]| x[0] * x[0] + 3.0 * x[1];
        let r = gradient_check(f, &[1.5, -2.0], &[3.0, 3.0], 1e-5);
        assert!(r.passes(1e-8), "{r:?}");
    }

    #[test]
    fn doubled_gradient_is_detected() {
        let f = |x: &[f64]| x[0] * x[0];
        let r = gradient_check(f, &[1.0], &[4.0], 1e-5);
        // |2g - g| / max(|2g|, |g|) = 1/2
        assert!((r.max_relative_error - 0.5).abs() < 1e-6);
        assert!(!r.passes(1e-5));
    }

    #[test]
    fn both_zero_is_zero_error() {
        assert_eq!(relative_error(0.0, 0.0), 0.0);
    }
}
