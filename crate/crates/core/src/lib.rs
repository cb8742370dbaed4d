//! Human activity recognition by decoding label names.
//!
//! A 1-D convolutional encoder summarizes a sensor window; its features
//! initialize an LSTM decoder that emits the activity name token by token.
//! Inference scores every valid label sequence through a prefix trie and
//! picks the most probable one, so predictions are always valid classes.
//!
//! * [`numkernel`]: tensors, layers with explicit backward passes, Adam, checkpoints
//! * [`labelspace`]: tokenized label names, trie, label augmentations, word vectors
//! * [`model`]: the encoder/decoder model and the plain classifier baseline
//! * [`data`]: CSV ingestion, windowing, normalization, synthetic data
//! * [`experiment`]: training loops, metrics, few-shot and downsampling suites

pub mod data;
pub mod error;
pub mod experiment;
pub mod labelspace;
pub mod model;
pub mod numkernel;

pub use data::{Dataset, NormStats, SyntheticSpec, TimeSeriesSample};
pub use error::{Error, Result};
pub use experiment::{Metrics, RunRecord, TrainConfig};
pub use labelspace::{LabelMap, LabelSpace};
pub use model::{AnyModel, EncoderConfig, ModelKind, ModelManifest, ShareModel, VanillaModel};
pub use numkernel::Tensor;

/// Generator used for every stochastic operation.
pub type SeededRng = rand_chacha::ChaCha8Rng;

/// Builds the crate's generator from a seed.
pub fn seeded_rng(seed: u64) -> SeededRng {
    use rand::SeedableRng;
    SeededRng::seed_from_u64(seed)
}
