use super::Tensor;
use crate::error::{Error, Result};

/// Numerically stable log-softmax of one row.
pub fn log_softmax_row(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = max + logits.iter().map(|v| (v - max).exp()).sum::<f64>().ln();
    logits.iter().map(|v| v - lse).collect()
}

/// Mean over the batch of `-log softmax(logits)[target]`, with its gradient
/// with respect to the logits.
pub fn softmax_cross_entropy(logits: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    let b = targets.len();
    let weights = vec![1.0 / b as f64; b];
    weighted_softmax_cross_entropy(logits, targets, &weights)
}

/// `sum_i w_i * CE(logits_i, target_i)`; rows with weight 0 contribute
/// neither loss nor gradient.
pub fn weighted_softmax_cross_entropy(logits: &Tensor, targets: &[usize], weights: &[f64]) -> Result<(f64, Tensor)> {
    logits.expect_rank("softmax_cross_entropy", 2)?;
    let (b, k) = (logits.dim(0), logits.dim(1));
    if targets.len() != b {
        return Err(Error::shape("softmax_cross_entropy", "batch", b, targets.len()));
    }
    if weights.len() != b {
        return Err(Error::shape("softmax_cross_entropy", "weights", b, weights.len()));
    }
    let mut grad = Tensor::zeros(&[b, k]);
    let mut loss = 0.0;
    for (i, (&t, &w)) in targets.iter().zip(weights).enumerate() {
        if t >= k {
            return Err(Error::Index {
                what: "target class",
                index: t,
                limit: k,
            });
        }
        if w == 0.0 {
            continue;
        }
        let lp = log_softmax_row(logits.row(i));
        loss -= w * lp[t];
        let g = &mut grad.data_mut()[i * k..(i + 1) * k];
        for (j, gj) in g.iter_mut().enumerate() {
            let p = lp[j].exp();
            *gj = w * (p - if j == t { 1.0 } else { 0.0 });
        }
    }
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{finite_difference_grad, max_rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::full(&[3, 4], 0.7);
        let (loss, _) = softmax_cross_entropy(&logits, &[0, 3, 1]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn confident_correct_is_near_zero() {
        let logits = Tensor::new(&[1, 2], vec![10.0, -10.0]).unwrap();
        let (loss, _) = softmax_cross_entropy(&logits, &[0]).unwrap();
        assert!(loss < 1e-8);
    }

    #[test]
    fn out_of_range_target() {
        let logits = Tensor::zeros(&[1, 2]);
        assert!(matches!(softmax_cross_entropy(&logits, &[2]), Err(Error::Index { .. })));
    }

    #[test]
    fn softmax_rows_sum_to_one() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let logits = Tensor::uniform(&[5, 7], 30.0, &mut rng);
        for i in 0..5 {
            let s: f64 = log_softmax_row(logits.row(i)).iter().map(|v| v.exp()).sum();
            assert!((s - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn gradient_is_softmax_minus_onehot() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let logits = Tensor::uniform(&[3, 5], 2.0, &mut rng);
        let targets = [4, 0, 2];
        let (_, grad) = softmax_cross_entropy(&logits, &targets).unwrap();
        for i in 0..3 {
            let lp = log_softmax_row(logits.row(i));
            for j in 0..5 {
                let want = (lp[j].exp() - if j == targets[i] { 1.0 } else { 0.0 }) / 3.0;
                assert!((grad.data()[i * 5 + j] - want).abs() < 1e-15);
            }
        }
        let num = finite_difference_grad(|p| Ok(softmax_cross_entropy(p, &targets)?.0), &logits, 1e-5).unwrap();
        assert!(max_rel_error(&grad, &num) < 1e-4);
    }
}
