//! Synthetic activity data with controllable label-name sharing.
//!
//! Class `(a, o)` is named `action{a} object{o}`. Its signal is an action
//! sinusoid (frequency `a + 1` cycles per window) on the first half of the
//! channels plus a constant object offset pattern on the rest, plus
//! Gaussian noise. Classes that share an action id share the action
//! waveform exactly as their names share the `action{a}` token.

use std::collections::HashSet;
use std::f64::consts::PI;

use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::{Dataset, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::seeded_rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    /// `(action id, object id)` per class.
    pub classes: Vec<(usize, usize)>,
    pub noise_std: f64,
    pub per_class: Vec<usize>,
    pub window: usize,
    pub channels: usize,
    pub seed: u64,
}

impl SyntheticSpec {
    /// `classes` classes with distinct actions and objects, equal sizes.
    pub fn balanced(classes: usize, per_class: usize, window: usize, channels: usize, noise_std: f64, seed: u64) -> Self {
        Self {
            classes: (0..classes).map(|c| (c, c)).collect(),
            noise_std,
            per_class: vec![per_class; classes],
            window,
            channels,
            seed,
        }
    }

    pub fn num_actions(&self) -> usize {
        self.classes.iter().map(|&(a, _)| a + 1).max().unwrap_or(0)
    }

    pub fn num_objects(&self) -> usize {
        self.classes.iter().map(|&(_, o)| o + 1).max().unwrap_or(0)
    }

    /// Channels carrying the action waveform; the rest carry object offsets.
    pub fn action_channels(&self) -> usize {
        self.channels.div_ceil(2)
    }

    pub fn label_names(&self) -> Vec<String> {
        self.classes.iter().map(|&(a, o)| format!("action{a} object{o}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Validation(msg));
        if self.classes.is_empty() {
            return bad("synthetic spec has no classes".into());
        }
        if self.per_class.len() != self.classes.len() {
            return bad(format!(
                "{} per-class counts for {} classes",
                self.per_class.len(),
                self.classes.len()
            ));
        }
        if self.channels < 2 {
            return bad("synthetic data needs at least 2 channels".into());
        }
        if self.window < crate::model::MIN_TIME {
            return bad(format!("window must be at least {}", crate::model::MIN_TIME));
        }
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return bad(format!("noise std must be finite and non-negative, got {}", self.noise_std));
        }
        let mut seen = HashSet::new();
        for &pair in &self.classes {
            if !seen.insert(pair) {
                return bad(format!("duplicate (action, object) pair {pair:?}"));
            }
        }
        Ok(())
    }

    /// The noise-free `[channels, window]` signal of class `class_id`.
    pub fn prototype(&self, class_id: usize) -> Tensor {
        let (a, o) = self.classes[class_id];
        let (v, t) = (self.channels, self.window);
        let n_action = self.action_channels();
        let theta = PI * o as f64 / self.num_objects() as f64;
        let mut x = Tensor::zeros(&[v, t]);
        for (c, row) in x.data_mut().chunks_exact_mut(t).enumerate() {
            if c < n_action {
                let phase = c as f64 * PI / 4.0;
                for (k, val) in row.iter_mut().enumerate() {
                    *val = (2.0 * PI * (a + 1) as f64 * k as f64 / t as f64 + phase).sin();
                }
            } else {
                row.fill((theta + (c - n_action) as f64 * PI / 2.0).cos());
            }
        }
        x
    }
}

/// Spec where class `c` has action `c % shared_actions` and object `c`, so
/// classes beyond `shared_actions` reuse earlier classes' action tokens.
pub fn shared_action_spec(
    shared_actions: usize,
    per_class: Vec<usize>,
    window: usize,
    channels: usize,
    noise_std: f64,
    seed: u64,
) -> Result<SyntheticSpec> {
    if shared_actions == 0 {
        return Err(Error::Validation("shared action count must be positive".into()));
    }
    let spec = SyntheticSpec {
        classes: (0..per_class.len()).map(|c| (c % shared_actions, c)).collect(),
        noise_std,
        per_class,
        window,
        channels,
        seed,
    };
    spec.validate()?;
    Ok(spec)
}

/// Samples are emitted class by class; the same spec always yields the
/// same dataset bit for bit.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = seeded_rng(spec.seed);
    let noise = Normal::new(0.0, spec.noise_std).map_err(|e| Error::Validation(e.to_string()))?;
    let mut samples = Vec::with_capacity(spec.per_class.iter().sum());
    for (class_id, &n) in spec.per_class.iter().enumerate() {
        let proto = spec.prototype(class_id);
        for _ in 0..n {
            let mut values = proto.clone();
            if spec.noise_std > 0.0 {
                values.data_mut().iter_mut().for_each(|x| *x += noise.sample(&mut rng));
            }
            samples.push(TimeSeriesSample { values, class_id });
        }
    }
    Dataset::new(samples, spec.label_names(), spec.channels, spec.window)
}
