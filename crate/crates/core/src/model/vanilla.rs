use rand::Rng;

use super::decode::argmax_lowest;
use super::encoder::{Encoder, EncoderConfig};
use crate::error::{Error, Result};
use crate::numkernel::{prefixed, prefixed_mut, softmax_cross_entropy, Linear, Mode, Parameterized, Tensor};

/// Same encoder with a linear softmax head over class ids.
#[derive(Debug, Clone)]
pub struct VanillaModel {
    pub encoder: Encoder,
    pub head: Linear,
    pending: Option<Tensor>,
}

impl VanillaModel {
    pub fn new(config: EncoderConfig, num_classes: usize, rng: &mut impl Rng) -> Result<Self> {
        if num_classes == 0 {
            return Err(Error::Validation("classifier needs at least one class".into()));
        }
        let encoder = Encoder::new(config, rng)?;
        let head = Linear::new(encoder.feature_dim(), num_classes, rng);
        Ok(Self {
            encoder,
            head,
            pending: None,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.head.out_features()
    }

    /// Encoder → head → mean softmax cross-entropy. Returns the loss and the
    /// logits; train mode keeps the gradient for [`VanillaModel::backward`].
    pub fn forward(&mut self, x: &Tensor, targets: &[usize], mode: Mode) -> Result<(f64, Tensor)> {
        self.clear_cache();
        let z = self.encoder.forward(x, mode)?;
        let logits = self.head.forward(&z, mode)?;
        let (loss, grad) = softmax_cross_entropy(&logits, targets)?;
        if mode == Mode::Train {
            self.pending = Some(grad);
        }
        Ok((loss, logits))
    }

    pub fn backward(&mut self) -> Result<()> {
        let g = self
            .pending
            .take()
            .ok_or_else(|| Error::Invariant("backward called without a train-mode loss".into()))?;
        let dz = self.head.backward(&g)?;
        self.encoder.backward(&dz)?;
        Ok(())
    }

    pub fn logits(&self, x: &Tensor) -> Result<Tensor> {
        self.head.infer(&self.encoder.infer(x)?)
    }

    /// Argmax class per row, lowest id on ties.
    pub fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        let logits = self.logits(x)?;
        Ok((0..logits.dim(0)).map(|b| argmax_lowest(logits.row(b))).collect())
    }

    pub fn clear_cache(&mut self) {
        self.pending = None;
        self.encoder.clear_cache();
        self.head.clear_cache();
    }
}

/// Free-function form of [`VanillaModel::forward`] in train mode.
pub fn vanilla_forward(model: &mut VanillaModel, x: &Tensor, targets: &[usize]) -> Result<(f64, Tensor)> {
    model.forward(x, targets, Mode::Train)
}

impl Parameterized for VanillaModel {
    fn params(&self) -> Vec<(String, &Tensor)> {
        let mut v = prefixed("encoder", self.encoder.params());
        v.extend(prefixed("head", self.head.params()));
        v
    }

    fn params_mut(&mut self) -> Vec<(String, &mut Tensor)> {
        let mut v = prefixed_mut("encoder", self.encoder.params_mut());
        v.extend(prefixed_mut("head", self.head.params_mut()));
        v
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeded_rng;

    fn cfg() -> EncoderConfig {
        EncoderConfig {
            in_channels: 2,
            widths: [3, 4],
        }
    }

    #[test]
    fn single_class_has_zero_loss() {
        let mut rng = seeded_rng(1);
        let mut m = VanillaModel::new(cfg(), 1, &mut rng).unwrap();
        let x = Tensor::uniform(&[3, 2, 5], 1.0, &mut rng);
        let (loss, _) = vanilla_forward(&mut m, &x, &[0, 0, 0]).unwrap();
        assert_eq!(loss, 0.0);
    }

    #[test]
    fn uniform_logits_give_ln_c() {
        let mut rng = seeded_rng(2);
        let mut m = VanillaModel::new(cfg(), 4, &mut rng).unwrap();
        m.head.weight = Tensor::zeros(&[4, 4]);
        m.head.bias = Tensor::zeros(&[4]);
        let x = Tensor::uniform(&[3, 2, 5], 1.0, &mut rng);
        let (loss, _) = vanilla_forward(&mut m, &x, &[0, 3, 1]).unwrap();
        assert!((loss - 4f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn target_out_of_range() {
        let mut rng = seeded_rng(3);
        let mut m = VanillaModel::new(cfg(), 2, &mut rng).unwrap();
        let x = Tensor::uniform(&[1, 2, 5], 1.0, &mut rng);
        assert!(matches!(m.forward(&x, &[2], Mode::Train), Err(Error::Index { .. })));
    }
}
