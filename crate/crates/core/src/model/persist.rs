//! Model directories: `model.ckpt` (tensor container) plus `manifest.json`
//! describing how to rebuild the model and which label space it decodes.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{AnyModel, Encoder, EncoderConfig, ShareModel, VanillaModel};
use crate::data::NormStats;
use crate::error::{Error, Result};
use crate::labelspace::{EmbeddingSource, EmbeddingTable, LabelSpace};
use crate::numkernel::{Checkpoint, Parameterized, RunningStats, Tensor};
use crate::seeded_rng;

pub const CHECKPOINT_FILE: &str = "model.ckpt";
pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Share,
    Vanilla,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelManifest {
    pub format_version: u32,
    pub kind: ModelKind,
    pub encoder: EncoderConfig,
    pub decoder_hidden: Option<usize>,
    pub embed_dim: Option<usize>,
    /// Class names as they appear in the data, in class-id order.
    pub class_names: Vec<String>,
    /// Names the decoding label space was built from (after any renaming).
    pub decode_names: Vec<String>,
    pub stop_tokens: Vec<String>,
    pub vocab: Vec<String>,
    pub label_space_hash: String,
    pub embedding_source: Option<EmbeddingSource>,
    pub window: usize,
    pub normalization: Option<NormStats>,
}

impl ModelManifest {
    /// Rebuilds the decoding label space and checks it against the recorded
    /// hash and vocabulary.
    pub fn label_space(&self) -> Result<LabelSpace> {
        let space = LabelSpace::build(&self.decode_names, &self.stop_tokens)?;
        if space.fingerprint() != self.label_space_hash || space.vocab() != self.vocab.as_slice() {
            return Err(Error::Validation(format!(
                "label space hash mismatch: manifest {}, rebuilt {}",
                self.label_space_hash,
                space.fingerprint()
            )));
        }
        Ok(space)
    }

    /// Fails unless `class_names` are exactly the names this model was trained on.
    pub fn check_labels(&self, class_names: &[String]) -> Result<()> {
        if class_names != self.class_names.as_slice() {
            return Err(Error::Validation(format!(
                "label file does not match the model: model has {:?}, got {:?}",
                self.class_names, class_names
            )));
        }
        Ok(())
    }
}

fn encoder_stats(prefix: &str, enc: &Encoder, ck: &mut Checkpoint) {
    for (name, bn) in [("bn1", &enc.bn1), ("bn2", &enc.bn2)] {
        if let Some(rs) = &bn.running {
            let c = rs.mean.len();
            ck.push(
                format!("{prefix}.{name}.running_mean"),
                Tensor::new(&[c], rs.mean.clone()).expect("non-empty"),
            );
            ck.push(
                format!("{prefix}.{name}.running_var"),
                Tensor::new(&[c], rs.var.clone()).expect("non-empty"),
            );
        }
    }
}

fn restore_encoder_stats(prefix: &str, enc: &mut Encoder, ck: &mut Checkpoint) -> Result<()> {
    for (name, bn) in [("bn1", &mut enc.bn1), ("bn2", &mut enc.bn2)] {
        let mean_key = format!("{prefix}.{name}.running_mean");
        if ck.get(&mean_key).is_none() {
            bn.running = None;
            continue;
        }
        let mean = ck.take(&mean_key)?;
        let var = ck.take(&format!("{prefix}.{name}.running_var"))?;
        mean.expect_shape("checkpoint", &[&mean_key], &[bn.channels()])?;
        var.expect_shape("checkpoint", &["running_var"], &[bn.channels()])?;
        bn.running = Some(RunningStats {
            mean: mean.into_data(),
            var: var.into_data(),
        });
    }
    Ok(())
}

fn param_checkpoint(model: &impl Parameterized, kind: ModelKind) -> Checkpoint {
    let mut ck = Checkpoint::new();
    ck.meta.insert("kind".into(), format!("{kind:?}").to_lowercase());
    ck.meta.insert("mode".into(), "eval".into());
    for (name, t) in model.params() {
        let mut t = t.clone();
        t.clear_grad();
        ck.push(name, t);
    }
    ck
}

fn restore_params(model: &mut impl Parameterized, ck: &mut Checkpoint) -> Result<()> {
    for (name, p) in model.params_mut() {
        let t = ck.take(&name)?;
        if t.shape() != p.shape() {
            return Err(Error::Validation(format!(
                "checkpoint tensor {name} has shape {:?}, model expects {:?}",
                t.shape(),
                p.shape()
            )));
        }
        *p = t;
    }
    Ok(())
}

fn finish(ck: Checkpoint) -> Result<()> {
    if let Some((name, _)) = ck.tensors.first() {
        return Err(Error::Validation(format!("checkpoint has unexpected tensor {name}")));
    }
    Ok(())
}

impl ShareModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = param_checkpoint(self, ModelKind::Share);
        encoder_stats("encoder", &self.encoder, &mut ck);
        ck
    }

    pub fn from_checkpoint(manifest: &ModelManifest, mut ck: Checkpoint) -> Result<Self> {
        let hidden = manifest
            .decoder_hidden
            .ok_or_else(|| Error::Validation("manifest lacks decoder_hidden".into()))?;
        let embed_dim = manifest
            .embed_dim
            .ok_or_else(|| Error::Validation("manifest lacks embed_dim".into()))?;
        let table = EmbeddingTable {
            vectors: Tensor::zeros(&[manifest.vocab.len(), embed_dim]),
            source: EmbeddingSource::Random,
        };
        let mut model = ShareModel::new(manifest.encoder, hidden, &table, &mut seeded_rng(0))?;
        restore_params(&mut model, &mut ck)?;
        restore_encoder_stats("encoder", &mut model.encoder, &mut ck)?;
        finish(ck)?;
        Ok(model)
    }
}

impl VanillaModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ck = param_checkpoint(self, ModelKind::Vanilla);
        encoder_stats("encoder", &self.encoder, &mut ck);
        ck
    }

    pub fn from_checkpoint(manifest: &ModelManifest, mut ck: Checkpoint) -> Result<Self> {
        let mut model = VanillaModel::new(manifest.encoder, manifest.class_names.len(), &mut seeded_rng(0))?;
        restore_params(&mut model, &mut ck)?;
        restore_encoder_stats("encoder", &mut model.encoder, &mut ck)?;
        finish(ck)?;
        Ok(model)
    }
}

/// Writes `manifest.json` and `model.ckpt` into `dir` (created if needed).
pub fn save_model(dir: &Path, model: &AnyModel, manifest: &ModelManifest) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ck = match model {
        AnyModel::Share(m) => m.to_checkpoint(),
        AnyModel::Vanilla(m) => m.to_checkpoint(),
    };
    ck.save(&dir.join(CHECKPOINT_FILE))?;
    let path = dir.join(MANIFEST_FILE);
    let json = serde_json::to_string_pretty(manifest)?;
    std::fs::write(&path, json + "\n").map_err(|e| Error::io(&path, e))
}

pub fn load_manifest(dir: &Path) -> Result<ModelManifest> {
    let path = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let manifest: ModelManifest = serde_json::from_str(&text)?;
    if manifest.format_version != MANIFEST_VERSION {
        return Err(Error::Validation(format!(
            "unsupported manifest version {}",
            manifest.format_version
        )));
    }
    Ok(manifest)
}

/// Loads a model directory; the label space is verified before any tensor
/// is read.
pub fn load_model(dir: &Path) -> Result<(AnyModel, ModelManifest, LabelSpace)> {
    let manifest = load_manifest(dir)?;
    let space = manifest.label_space()?;
    let ck = Checkpoint::load(&dir.join(CHECKPOINT_FILE))?;
    let model = match manifest.kind {
        ModelKind::Share => AnyModel::Share(ShareModel::from_checkpoint(&manifest, ck)?),
        ModelKind::Vanilla => AnyModel::Vanilla(VanillaModel::from_checkpoint(&manifest, ck)?),
    };
    Ok((model, manifest, space))
}
