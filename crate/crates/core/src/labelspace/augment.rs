use rand::Rng;

use super::{meaningful_tokens, LabelSequence, LabelSpace};

/// Token-level augmentation of a training target.
///
/// With probability `p_aug` the target becomes one meaningful token of the
/// label chosen uniformly; otherwise (or when the label has no meaningful
/// token) the full sequence is kept.
pub fn augment_label(seq: &LabelSequence, space: &LabelSpace, p_aug: f64, rng: &mut impl Rng) -> Vec<usize> {
    debug_assert!((0.0..=1.0).contains(&p_aug));
    let draw: f64 = rng.random();
    if draw >= p_aug {
        return seq.tokens.clone();
    }
    let candidates = meaningful_tokens(seq, space);
    if candidates.is_empty() {
        return seq.tokens.clone();
    }
    vec![candidates[rng.random_range(0..candidates.len())]]
}
