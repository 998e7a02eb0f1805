//! Finite-difference gradient verification.
//!
//! The numerical gradient is the central difference
//! `(f(x + h) - f(x - h)) / (2h)` applied one element at a time; it touches
//! only the forward path, so it is an oracle that stays independent of every
//! analytic backward implementation it checks.

use crate::nn::tensor::Tensor;

/// Canonical finite-difference step.
pub const FD_STEP: f64 = 1e-3;

/// Central-difference gradient of a scalar function of one tensor.
pub fn numerical_grad(x: &Tensor, mut f: impl FnMut(&Tensor) -> f64, step: f64) -> Vec<f64> {
    let mut probe = x.clone();
    let mut grad = vec![0.0f64; x.numel()];
    for i in 0..x.numel() {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + step;
        let plus = f(&probe);
        probe.data_mut()[i] = original - step;
        let minus = f(&probe);
        probe.data_mut()[i] = original;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Worst relative disagreement between analytic and numeric gradients:
/// `max_i |a_i - n_i| / max(1, |a_i|, |n_i|)`.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1.0))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_gradient() {
        let x = Tensor::from_vec(&[3], vec![1.0, -2.0, 0.5]).unwrap();
        let num = numerical_grad(&x, |t| t.data().iter().map(|v| v * v).sum(), FD_STEP);
        let expected = [2.0, -4.0, 1.0];
        assert!(max_rel_error(&expected, &num) < 1e-6);
    }

    #[test]
    fn rel_error_uses_unit_floor() {
        assert!(max_rel_error(&[0.0], &[5e-5]) < 1e-4);
        assert!(max_rel_error(&[100.0], &[101.0]) < 2e-2);
    }
}
