use serde::{Deserialize, Serialize};

use super::{Mode, Parameterized, Tensor};
use crate::error::{Error, Result};

pub const BN_EPS: f64 = 1e-5;
pub const BN_MOMENTUM: f64 = 0.1;

/// Running per-channel mean and (unbiased) variance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

/// Activations kept by a train-mode pass for the backward pass.
#[derive(Debug, Clone)]
pub struct BnCache {
    pub normalized: Tensor,
    pub inv_std: Vec<f64>,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

fn dims(op: &'static str, x: &Tensor, gamma: &Tensor, beta: &Tensor) -> Result<(usize, usize, usize)> {
    x.expect_rank(op, 3)?;
    let (b, c, t) = (x.dim(0), x.dim(1), x.dim(2));
    gamma.expect_shape(op, &["gamma"], &[c])?;
    beta.expect_shape(op, &["beta"], &[c])?;
    Ok((b, c, t))
}

/// Normalizes each channel over batch and time with the batch statistics.
pub fn batchnorm1d_train(x: &Tensor, gamma: &Tensor, beta: &Tensor, eps: f64) -> Result<(Tensor, BnCache)> {
    let (b, c, t) = dims("batchnorm1d", x, gamma, beta)?;
    let n = b * t;
    if n < 2 {
        return Err(Error::Validation(format!(
            "batchnorm1d train mode needs at least 2 values per channel, got {n}"
        )));
    }
    let xd = x.data();
    let mut mean = vec![0.0; c];
    let mut var = vec![0.0; c];
    for bi in 0..b {
        for ch in 0..c {
            let row = &xd[(bi * c + ch) * t..(bi * c + ch + 1) * t];
            mean[ch] += row.iter().sum::<f64>();
        }
    }
    for m in &mut mean {
        *m /= n as f64;
    }
    for bi in 0..b {
        for ch in 0..c {
            let row = &xd[(bi * c + ch) * t..(bi * c + ch + 1) * t];
            var[ch] += row.iter().map(|v| (v - mean[ch]).powi(2)).sum::<f64>();
        }
    }
    for v in &mut var {
        *v /= n as f64;
    }
    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + eps).sqrt()).collect();

    let mut normalized = Tensor::zeros(x.shape());
    let mut y = Tensor::zeros(x.shape());
    {
        let nd = normalized.data_mut();
        let yd = y.data_mut();
        for bi in 0..b {
            for ch in 0..c {
                let (g, be) = (gamma.data()[ch], beta.data()[ch]);
                for ti in 0..t {
                    let i = (bi * c + ch) * t + ti;
                    let xh = (xd[i] - mean[ch]) * inv_std[ch];
                    nd[i] = xh;
                    yd[i] = g * xh + be;
                }
            }
        }
    }
    Ok((
        y,
        BnCache {
            normalized,
            inv_std,
            mean,
            var,
        },
    ))
}

pub fn batchnorm1d_eval(x: &Tensor, gamma: &Tensor, beta: &Tensor, stats: &RunningStats, eps: f64) -> Result<Tensor> {
    let (b, c, t) = dims("batchnorm1d", x, gamma, beta)?;
    if stats.mean.len() != c {
        return Err(Error::shape("batchnorm1d", "running stats", c, stats.mean.len()));
    }
    let mut y = x.clone();
    y.clear_grad();
    let yd = y.data_mut();
    for bi in 0..b {
        for ch in 0..c {
            let scale = gamma.data()[ch] / (stats.var[ch] + eps).sqrt();
            let shift = beta.data()[ch] - stats.mean[ch] * scale;
            for v in &mut yd[(bi * c + ch) * t..(bi * c + ch + 1) * t] {
                *v = *v * scale + shift;
            }
        }
    }
    Ok(y)
}

/// Returns `(d_input, d_gamma, d_beta)` for a train-mode pass.
pub fn batchnorm1d_backward(cache: &BnCache, gamma: &Tensor, grad_out: &Tensor) -> Result<(Tensor, Tensor, Tensor)> {
    grad_out.expect_shape("batchnorm1d_backward", &["batch", "channels", "time"], cache.normalized.shape())?;
    let (b, c, t) = (grad_out.dim(0), grad_out.dim(1), grad_out.dim(2));
    let n = (b * t) as f64;
    let dy = grad_out.data();
    let xh = cache.normalized.data();

    let mut dgamma = Tensor::zeros(&[c]);
    let mut dbeta = Tensor::zeros(&[c]);
    for bi in 0..b {
        for ch in 0..c {
            let r = (bi * c + ch) * t..(bi * c + ch + 1) * t;
            dbeta.data_mut()[ch] += dy[r.clone()].iter().sum::<f64>();
            dgamma.data_mut()[ch] += dy[r.clone()].iter().zip(&xh[r]).map(|(d, x)| d * x).sum::<f64>();
        }
    }
    let mut dx = Tensor::zeros(grad_out.shape());
    let dxd = dx.data_mut();
    for bi in 0..b {
        for ch in 0..c {
            let g = gamma.data()[ch];
            let k = g * cache.inv_std[ch] / n;
            let (sum_dy, sum_dy_xh) = (dbeta.data()[ch], dgamma.data()[ch]);
            for ti in 0..t {
                let i = (bi * c + ch) * t + ti;
                dxd[i] = k * (n * dy[i] - sum_dy - xh[i] * sum_dy_xh);
            }
        }
    }
    Ok((dx, dgamma, dbeta))
}

/// Per-channel batch normalization over `[batch, channels, time]`.
#[derive(Debug, Clone)]
pub struct BatchNorm1d {
    pub gamma: Tensor,
    pub beta: Tensor,
    pub running: Option<RunningStats>,
    pub momentum: f64,
    pub eps: f64,
    cache: Vec<BnCache>,
}

impl BatchNorm1d {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], 1.0),
            beta: Tensor::zeros(&[channels]),
            running: None,
            momentum: BN_MOMENTUM,
            eps: BN_EPS,
            cache: Vec::new(),
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        match mode {
            Mode::Eval => self.infer(x),
            Mode::Train => {
                let (y, cache) = batchnorm1d_train(x, &self.gamma, &self.beta, self.eps)?;
                let n = (x.dim(0) * x.dim(2)) as f64;
                let unbiased = n / (n - 1.0);
                let m = self.momentum;
                match &mut self.running {
                    None => {
                        // First update starts from the conventional (0, 1) state.
                        self.running = Some(RunningStats {
                            mean: cache.mean.iter().map(|mu| m * mu).collect(),
                            var: cache.var.iter().map(|v| (1.0 - m) + m * v * unbiased).collect(),
                        });
                    }
                    Some(rs) => {
                        for ch in 0..rs.mean.len() {
                            rs.mean[ch] = (1.0 - m) * rs.mean[ch] + m * cache.mean[ch];
                            rs.var[ch] = (1.0 - m) * rs.var[ch] + m * cache.var[ch] * unbiased;
                        }
                    }
                }
                self.cache.push(cache);
                Ok(y)
            }
        }
    }

    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        let stats = self.running.as_ref().ok_or(Error::UninitializedStats)?;
        batchnorm1d_eval(x, &self.gamma, &self.beta, stats, self.eps)
    }

    pub fn backward(&mut self, grad_out: &Tensor) -> Result<Tensor> {
        let cache = self
            .cache
            .pop()
            .ok_or_else(|| Error::Invariant("batchnorm1d backward without a cached train-mode forward".into()))?;
        let (dx, dg, db) = batchnorm1d_backward(&cache, &self.gamma, grad_out)?;
        super::axpy(1.0, dg.data(), self.gamma.grad_mut());
        super::axpy(1.0, db.data(), self.beta.grad_mut());
        Ok(dx)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
    }
}

impl Parameterized for BatchNorm1d {
    fn params(&self) -> Vec<(String, &Tensor)> {
        vec![("gamma".into(), &self.gamma), ("beta".into(), &self.beta)]
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        vec![("gamma".into(), &mut self.gamma), ("beta".into(), &mut self.beta)]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::{dot, finite_difference_grad, max_rel_error};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_channels_normalize_to_zero() {
        let mut data = Vec::new();
        for _b in 0..2 {
            for ch in 0..3 {
                data.extend(std::iter::repeat(ch as f64 * 2.5 - 1.0).take(4));
            }
        }
        let x = Tensor::new(&[2, 3, 4], data).unwrap();
        let (y, _) = batchnorm1d_train(&x, &Tensor::full(&[3], 1.0), &Tensor::zeros(&[3]), BN_EPS).unwrap();
        assert!(y.data().iter().all(|v| v.abs() < 1e-9));
    }

    #[test]
    fn zero_gamma_gives_beta() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let x = Tensor::uniform(&[3, 2, 5], 1.0, &mut rng);
        let beta = Tensor::new(&[2], vec![0.7, -0.2]).unwrap();
        let (y, _) = batchnorm1d_train(&x, &Tensor::zeros(&[2]), &beta, BN_EPS).unwrap();
        for bi in 0..3 {
            for ch in 0..2 {
                for t in 0..5 {
                    assert_eq!(y.data()[(bi * 2 + ch) * 5 + t], beta.data()[ch]);
                }
            }
        }
    }

    #[test]
    fn train_output_is_standardized() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        // Scale keeps eps / var below the 1e-6 tolerance.
        let x = Tensor::uniform(&[4, 3, 7], 10.0, &mut rng);
        let (y, _) = batchnorm1d_train(&x, &Tensor::full(&[3], 1.0), &Tensor::zeros(&[3]), BN_EPS).unwrap();
        for ch in 0..3 {
            let vals: Vec<f64> = (0..4)
                .flat_map(|b| (0..7).map(move |t| (b, t)))
                .map(|(b, t)| y.data()[(b * 3 + ch) * 7 + t])
                .collect();
            let n = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / n;
            let var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let raw: Vec<f64> = (0..4)
                .flat_map(|b| (0..7).map(move |t| (b, t)))
                .map(|(b, t)| x.data()[(b * 3 + ch) * 7 + t])
                .collect();
            let rm = raw.iter().sum::<f64>() / n;
            let rv = raw.iter().map(|v| (v - rm).powi(2)).sum::<f64>() / n;
            assert!(mean.abs() < 1e-6);
            assert!((var - 1.0).abs() < 1e-6);
            assert!((var - rv / (rv + BN_EPS)).abs() < 1e-12);
        }
    }

    #[test]
    fn eval_before_train_is_uninitialized() {
        let bn = BatchNorm1d::new(2);
        assert!(matches!(bn.infer(&Tensor::zeros(&[1, 2, 3])), Err(Error::UninitializedStats)));
    }

    #[test]
    fn eval_does_not_touch_running_stats() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let mut bn = BatchNorm1d::new(2);
        bn.forward(&Tensor::uniform(&[2, 2, 4], 1.0, &mut rng), Mode::Train).unwrap();
        let before = bn.running.clone();
        bn.forward(&Tensor::uniform(&[2, 2, 4], 1.0, &mut rng), Mode::Eval).unwrap();
        assert_eq!(before, bn.running);
        assert_eq!(bn.cache.len(), 1);
    }

    #[test]
    fn single_value_per_channel_rejected() {
        let x = Tensor::zeros(&[1, 2, 1]);
        assert!(batchnorm1d_train(&x, &Tensor::full(&[2], 1.0), &Tensor::zeros(&[2]), BN_EPS).is_err());
    }

    #[test]
    fn gradients_match_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = Tensor::uniform(&[3, 2, 4], 1.0, &mut rng);
        let gamma = Tensor::uniform(&[2], 1.0, &mut rng);
        let beta = Tensor::uniform(&[2], 1.0, &mut rng);
        let r = Tensor::uniform(&[3, 2, 4], 1.0, &mut rng);
        let loss = |x: &Tensor, g: &Tensor, b: &Tensor| dot(batchnorm1d_train(x, g, b, BN_EPS).unwrap().0.data(), r.data());
        let (_, cache) = batchnorm1d_train(&x, &gamma, &beta, BN_EPS).unwrap();
        let (dx, dg, db) = batchnorm1d_backward(&cache, &gamma, &r).unwrap();
        let nx = finite_difference_grad(|p| Ok(loss(p, &gamma, &beta)), &x, 1e-5).unwrap();
        let ng = finite_difference_grad(|p| Ok(loss(&x, p, &beta)), &gamma, 1e-5).unwrap();
        let nb = finite_difference_grad(|p| Ok(loss(&x, &gamma, p)), &beta, 1e-5).unwrap();
        assert!(max_rel_error(&dx, &nx) < 1e-4, "{}", max_rel_error(&dx, &nx));
        assert!(max_rel_error(&dg, &ng) < 1e-4);
        assert!(max_rel_error(&db, &nb) < 1e-4);
    }
}
