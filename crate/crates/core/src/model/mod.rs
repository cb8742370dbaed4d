//! The label-decoding network, its plain-classifier baseline, and
//! persistence.

mod decode;
mod encoder;
pub mod persist;
mod share;
mod vanilla;

pub use decode::{argmax_lowest, constrained_decode, constrained_decode_with_stats, DecodeResult, DecodeStats};
pub use encoder::{Encoder, EncoderConfig, MIN_TIME};
pub use persist::{load_model, save_model, ModelKind, ModelManifest};
pub use share::ShareModel;
pub use vanilla::{vanilla_forward, VanillaModel};

use crate::error::Result;
use crate::labelspace::LabelSpace;
use crate::numkernel::{Parameterized, Tensor};

/// Trainable element count, batch-norm running statistics excluded.
pub fn count_parameters(model: &impl Parameterized) -> usize {
    model.num_parameters()
}

/// Either trained model, for code that handles both uniformly.
#[derive(Debug, Clone)]
pub enum AnyModel {
    Share(ShareModel),
    Vanilla(VanillaModel),
}

impl AnyModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            AnyModel::Share(_) => ModelKind::Share,
            AnyModel::Vanilla(_) => ModelKind::Vanilla,
        }
    }

    /// Predicted class ids: constrained decoding or argmax over logits.
    pub fn predict(&self, x: &Tensor, space: &LabelSpace) -> Result<Vec<usize>> {
        match self {
            AnyModel::Share(m) => Ok(constrained_decode(m, x, space)?.into_iter().map(|r| r.class_id).collect()),
            AnyModel::Vanilla(m) => m.predict(x),
        }
    }

    /// Eval-mode encoder features `[batch, d]`.
    pub fn encode(&self, x: &Tensor) -> Result<Tensor> {
        match self {
            AnyModel::Share(m) => m.encode(x),
            AnyModel::Vanilla(m) => m.encoder.infer(x),
        }
    }

    pub fn num_parameters(&self) -> usize {
        match self {
            AnyModel::Share(m) => m.num_parameters(),
            AnyModel::Vanilla(m) => m.num_parameters(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::labelspace::load_embeddings;
    use crate::numkernel::{Conv1d, Linear};
    use crate::seeded_rng;

    #[test]
    fn small_layer_counts() {
        let mut rng = seeded_rng(0);
        assert_eq!(count_parameters(&Linear::new(2, 3, &mut rng)), 9);
        assert_eq!(count_parameters(&Conv1d::new(1, 1, true, &mut rng)), 4);
    }

    #[test]
    fn default_model_count_matches_shape_arithmetic() {
        let space = LabelSpace::build(&["walk", "walk upstairs", "walk downstairs", "sit", "stand", "lie"], &[] as &[&str])
            .unwrap();
        let mut rng = seeded_rng(1);
        let emb = load_embeddings(None, &space, 64, &mut rng).unwrap();
        let v = 9;
        let model = ShareModel::new(EncoderConfig::new(v), 128, &emb, &mut rng).unwrap();
        let (w1, w2, hd, e, m) = (64, 128, 128, 64, space.vocab_size());
        let encoder = (w1 * v * 3 + 2 * w1) + (w2 * w1 * 3 + 2 * w2);
        let init = 2 * (w2 * hd + hd);
        let lstm = 4 * hd * e + 4 * hd * hd + 4 * hd;
        let out = hd * m + m;
        assert_eq!(count_parameters(&model), encoder + init + m * e + lstm + out);

        let vanilla = VanillaModel::new(EncoderConfig::new(v), 6, &mut rng).unwrap();
        assert_eq!(count_parameters(&vanilla), encoder + w2 * 6 + 6);
    }
}
