//! Central finite differences, used as the gradient oracle in tests.

use super::Tensor;
use crate::error::{Error, Result};

/// Elementwise central-difference gradient of `loss_fn` at `param`.
pub fn finite_difference_grad(
    mut loss_fn: impl FnMut(&Tensor) -> Result<f64>,
    param: &Tensor,
    epsilon: f64,
) -> Result<Tensor> {
    let mut probe = param.clone();
    probe.clear_grad();
    let mut grad = Tensor::zeros(param.shape());
    for i in 0..param.len() {
        let orig = probe.data()[i];
        probe.data_mut()[i] = orig + epsilon;
        let plus = loss_fn(&probe)?;
        probe.data_mut()[i] = orig - epsilon;
        let minus = loss_fn(&probe)?;
        probe.data_mut()[i] = orig;
        if !plus.is_finite() || !minus.is_finite() {
            return Err(Error::Numeric(format!("non-finite loss while probing element {i}")));
        }
        grad.data_mut()[i] = (plus - minus) / (2.0 * epsilon);
    }
    Ok(grad)
}

/// `max |analytic - numeric| / (|numeric| + 1e-8)` over all elements.
pub fn max_rel_error(analytic: &Tensor, numeric: &Tensor) -> f64 {
    assert_eq!(analytic.shape(), numeric.shape(), "gradient shapes differ");
    analytic
        .data()
        .iter()
        .zip(numeric.data())
        .map(|(a, n)| (a - n).abs() / (n.abs() + 1e-8))
        .fold(0.0, f64::max)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn square_at_two() {
        let w = Tensor::new(&[1], vec![2.0]).unwrap();
        let g = finite_difference_grad(|p| Ok(p.data()[0] * p.data()[0]), &w, 1e-5).unwrap();
        assert!((g.data()[0] - 4.0).abs() < 1e-6);
    }

    #[test]
    fn sum_gives_ones() {
        let w = Tensor::new(&[2, 3], vec![0.3, -1.0, 2.0, 5.0, 0.0, 1.5]).unwrap();
        let g = finite_difference_grad(|p| Ok(p.data().iter().sum()), &w, 1e-5).unwrap();
        for v in g.data() {
            assert!((v - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn non_finite_loss_is_numeric_error() {
        let w = Tensor::new(&[1], vec![0.0]).unwrap();
        let r = finite_difference_grad(|_| Ok(f64::NAN), &w, 1e-5);
        assert!(matches!(r, Err(Error::Numeric(_))));
    }
}
