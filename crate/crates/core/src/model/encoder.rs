use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::{
    prefixed, prefixed_mut, relu, relu_backward, BatchNorm1d, Conv1d, Mode, Parameterized, Tensor,
};

/// Shape of the two-layer convolutional encoder. The feature dimension is
/// the second conv width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncoderConfig {
    pub in_channels: usize,
    pub widths: [usize; 2],
}

impl EncoderConfig {
    pub fn new(in_channels: usize) -> Self {
        Self {
            in_channels,
            widths: [64, 128],
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.widths[1]
    }

    pub fn validate(&self) -> Result<()> {
        if self.in_channels == 0 || self.widths.contains(&0) {
            return Err(Error::Validation(format!("encoder widths must be positive: {self:?}")));
        }
        Ok(())
    }
}

/// conv → batch norm → ReLU, twice, then the mean over time.
#[derive(Debug, Clone)]
pub struct Encoder {
    pub config: EncoderConfig,
    pub conv1: Conv1d,
    pub bn1: BatchNorm1d,
    pub conv2: Conv1d,
    pub bn2: BatchNorm1d,
    /// ReLU outputs of each block, one pair per train-mode pass.
    cache: Vec<(Tensor, Tensor)>,
}

pub const MIN_TIME: usize = 3;

impl Encoder {
    pub fn new(config: EncoderConfig, rng: &mut impl Rng) -> Result<Self> {
        config.validate()?;
        let [w1, w2] = config.widths;
        // Convs carry no bias: the batch norm that follows cancels it.
        Ok(Self {
            config,
            conv1: Conv1d::new(config.in_channels, w1, false, rng),
            bn1: BatchNorm1d::new(w1),
            conv2: Conv1d::new(w1, w2, false, rng),
            bn2: BatchNorm1d::new(w2),
            cache: Vec::new(),
        })
    }

    pub fn feature_dim(&self) -> usize {
        self.config.feature_dim()
    }

    fn check_input(&self, x: &Tensor) -> Result<()> {
        x.expect_rank("encode", 3)?;
        if x.dim(1) != self.config.in_channels {
            return Err(Error::shape("encode", "channels", self.config.in_channels, x.dim(1)));
        }
        if x.dim(2) < MIN_TIME {
            return Err(Error::Validation(format!(
                "encoder needs at least {MIN_TIME} timesteps, got {}",
                x.dim(2)
            )));
        }
        Ok(())
    }

    /// `[batch, channels, time]` → `[batch, d]`.
    pub fn forward(&mut self, x: &Tensor, mode: Mode) -> Result<Tensor> {
        if mode == Mode::Eval {
            return self.infer(x);
        }
        self.check_input(x)?;
        let a1 = self.conv1.forward(x, mode)?;
        let r1 = relu(&self.bn1.forward(&a1, mode)?);
        let a2 = self.conv2.forward(&r1, mode)?;
        let r2 = relu(&self.bn2.forward(&a2, mode)?);
        let z = mean_over_time(&r2);
        self.cache.push((r1, r2));
        Ok(z)
    }

    /// Eval-mode forward; never touches caches or running statistics.
    pub fn infer(&self, x: &Tensor) -> Result<Tensor> {
        self.check_input(x)?;
        let r1 = relu(&self.bn1.infer(&self.conv1.infer(x)?)?);
        let r2 = relu(&self.bn2.infer(&self.conv2.infer(&r1)?)?);
        Ok(mean_over_time(&r2))
    }

    /// Accumulates parameter gradients from `grad_z: [batch, d]`; returns the
    /// input gradient.
    pub fn backward(&mut self, grad_z: &Tensor) -> Result<Tensor> {
        let (r1, r2) = self
            .cache
            .pop()
            .ok_or_else(|| Error::Invariant("encoder backward without a cached train-mode forward".into()))?;
        let dr2 = mean_over_time_backward(grad_z, r2.dim(2))?;
        let da2 = self.bn2.backward(&relu_backward(&r2, &dr2))?;
        let dr1 = self.conv2.backward(&da2)?;
        let da1 = self.bn1.backward(&relu_backward(&r1, &dr1))?;
        self.conv1.backward(&da1)
    }

    pub fn clear_cache(&mut self) {
        self.cache.clear();
        self.conv1.clear_cache();
        self.bn1.clear_cache();
        self.conv2.clear_cache();
        self.bn2.clear_cache();
    }
}

impl Parameterized for Encoder {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("conv1", self.conv1.params());
        v.extend(prefixed("bn1", self.bn1.params()));
        v.extend(prefixed("conv2", self.conv2.params()));
        v.extend(prefixed("bn2", self.bn2.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("conv1", self.conv1.params_mut());
        v.extend(prefixed_mut("bn1", self.bn1.params_mut()));
        v.extend(prefixed_mut("conv2", self.conv2.params_mut()));
        v.extend(prefixed_mut("bn2", self.bn2.params_mut()));
        v
    }
}

fn mean_over_time(x: &Tensor) -> Tensor {
    let (b, c, t) = (x.dim(0), x.dim(1), x.dim(2));
    let mut z = Tensor::zeros(&[b, c]);
    for (zi, row) in z.data_mut().iter_mut().zip(x.data().chunks_exact(t)) {
        *zi = row.iter().sum::<f64>() / t as f64;
    }
    z
}

fn mean_over_time_backward(grad_z: &Tensor, t: usize) -> Result<Tensor> {
    grad_z.expect_rank("mean_over_time_backward", 2)?;
    let (b, c) = (grad_z.dim(0), grad_z.dim(1));
    let mut g = Tensor::zeros(&[b, c, t]);
    for (row, &gz) in g.data_mut().chunks_exact_mut(t).zip(grad_z.data()) {
        row.fill(gz / t as f64);
    }
    Ok(g)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numkernel::RunningStats;
    use crate::seeded_rng;

    fn small() -> EncoderConfig {
        EncoderConfig {
            in_channels: 3,
            widths: [4, 5],
        }
    }

    #[test]
    fn zero_input_gives_zero_features() {
        let mut rng = seeded_rng(1);
        let mut enc = Encoder::new(small(), &mut rng).unwrap();
        for (bn, c) in [(&mut enc.bn1, 4), (&mut enc.bn2, 5)] {
            bn.running = Some(RunningStats {
                mean: vec![0.0; c],
                var: vec![1.0; c],
            });
        }
        let z = enc.infer(&Tensor::zeros(&[2, 3, 6])).unwrap();
        assert_eq!(z.shape(), &[2, 5]);
        assert!(z.data().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn output_shape_for_any_length() {
        let mut rng = seeded_rng(2);
        let mut enc = Encoder::new(small(), &mut rng).unwrap();
        enc.forward(&Tensor::uniform(&[4, 3, 9], 1.0, &mut rng), Mode::Train).unwrap();
        enc.clear_cache();
        for t in 3..12 {
            let z = enc.infer(&Tensor::uniform(&[2, 3, t], 1.0, &mut rng)).unwrap();
            assert_eq!(z.shape(), &[2, 5]);
        }
    }

    #[test]
    fn rejects_wrong_channels_and_short_series() {
        let mut rng = seeded_rng(3);
        let mut enc = Encoder::new(small(), &mut rng).unwrap();
        assert!(matches!(
            enc.forward(&Tensor::zeros(&[2, 4, 8]), Mode::Train),
            Err(Error::Shape { .. })
        ));
        assert!(matches!(
            enc.forward(&Tensor::zeros(&[2, 3, 2]), Mode::Train),
            Err(Error::Validation(_))
        ));
    }

    /// On a constant series the feature map is constant except within two
    /// steps of each edge, and those edge values do not depend on the
    /// length. So `L * pool(L) = edges + (L - 4) * interior`, which makes
    /// `4T p(4T) - 2T p(2T) = 2 (2T p(2T) - T p(T))` an exact identity.
    #[test]
    fn constant_series_pooling_algebra() {
        let mut rng = seeded_rng(4);
        let mut enc = Encoder::new(small(), &mut rng).unwrap();
        enc.forward(&Tensor::uniform(&[4, 3, 10], 1.0, &mut rng), Mode::Train).unwrap();
        enc.clear_cache();
        let level = [0.3, -0.7, 1.1];
        let constant = |t: usize| {
            let mut x = Tensor::zeros(&[1, 3, t]);
            for (c, row) in x.data_mut().chunks_exact_mut(t).enumerate() {
                row.fill(level[c]);
            }
            x
        };
        let t = 8;
        let p1 = enc.infer(&constant(t)).unwrap();
        // repeating each step of a constant series doubles its length
        let p2 = enc.infer(&constant(2 * t)).unwrap();
        let p4 = enc.infer(&constant(4 * t)).unwrap();
        let tf = t as f64;
        for k in 0..5 {
            let (a, b, c) = (p1.data()[k], p2.data()[k], p4.data()[k]);
            let lhs = 4.0 * tf * c - 2.0 * tf * b;
            let rhs = 2.0 * (2.0 * tf * b - tf * a);
            assert!((lhs - rhs).abs() < 1e-12, "feature {k}: {lhs} vs {rhs}");
        }
    }
}
