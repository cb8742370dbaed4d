//! Windowed multivariate time series: ingestion, normalization,
//! resampling, subsetting and a synthetic generator.

mod cache;
mod csv_io;
mod synthetic;

pub use cache::{load_dataset_cache, save_dataset_cache};
pub use csv_io::{load_dataset, load_dataset_with_names, read_windows, write_dataset_csv, CsvWindows, Window};
pub use synthetic::{generate_synthetic, shared_action_spec, SyntheticSpec};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numkernel::Tensor;
use crate::seeded_rng;

pub const STD_FLOOR: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesSample {
    /// `[channels, time]`.
    pub values: Tensor,
    pub class_id: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: Vec<TimeSeriesSample>,
    pub label_names: Vec<String>,
    pub channels: usize,
    pub window: usize,
    /// Statistics this dataset was normalized with, if any.
    pub norm: Option<NormStats>,
}

impl Dataset {
    pub fn new(samples: Vec<TimeSeriesSample>, label_names: Vec<String>, channels: usize, window: usize) -> Result<Self> {
        let ds = Self {
            samples,
            label_names,
            channels,
            window,
            norm: None,
        };
        ds.validate()?;
        Ok(ds)
    }

    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.samples.iter().enumerate() {
            if s.values.shape() != [self.channels, self.window] {
                return Err(Error::Validation(format!(
                    "sample {i} has shape {:?}, dataset expects [{}, {}]",
                    s.values.shape(),
                    self.channels,
                    self.window
                )));
            }
            if s.class_id >= self.label_names.len() {
                return Err(Error::Index {
                    what: "class id",
                    index: s.class_id,
                    limit: self.label_names.len(),
                });
            }
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.label_names.len()
    }

    pub fn class_ids(&self) -> Vec<usize> {
        self.samples.iter().map(|s| s.class_id).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes()];
        for s in &self.samples {
            counts[s.class_id] += 1;
        }
        counts
    }

    /// Same metadata, samples at `indices` in that order.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            samples: indices.iter().map(|&i| self.samples[i].clone()).collect(),
            label_names: self.label_names.clone(),
            channels: self.channels,
            window: self.window,
            norm: self.norm.clone(),
        }
    }

    /// Stacks the samples at `indices` into `[batch, channels, window]`.
    pub fn batch(&self, indices: &[usize]) -> Result<(Tensor, Vec<usize>)> {
        if indices.is_empty() {
            return Err(Error::Validation("empty batch".into()));
        }
        let per = self.channels * self.window;
        let mut data = Vec::with_capacity(indices.len() * per);
        let mut labels = Vec::with_capacity(indices.len());
        for &i in indices {
            let s = self.samples.get(i).ok_or(Error::Index {
                what: "sample",
                index: i,
                limit: self.samples.len(),
            })?;
            data.extend_from_slice(s.values.data());
            labels.push(s.class_id);
        }
        Ok((Tensor::new(&[indices.len(), self.channels, self.window], data)?, labels))
    }

    /// All samples as one batch.
    pub fn all(&self) -> Result<(Tensor, Vec<usize>)> {
        self.batch(&(0..self.len()).collect::<Vec<_>>())
    }
}

/// Per-channel mean and standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population statistics over every sample and timestep; the standard
    /// deviation is floored at [`STD_FLOOR`].
    pub fn fit(ds: &Dataset) -> Result<Self> {
        if ds.is_empty() {
            return Err(Error::Validation("cannot fit normalization on an empty dataset".into()));
        }
        let v = ds.channels;
        let n = (ds.len() * ds.window) as f64;
        let mut mean = vec![0.0; v];
        for s in &ds.samples {
            for (c, row) in s.values.data().chunks_exact(ds.window).enumerate() {
                mean[c] += row.iter().sum::<f64>();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; v];
        for s in &ds.samples {
            for (c, row) in s.values.data().chunks_exact(ds.window).enumerate() {
                var[c] += row.iter().map(|x| (x - mean[c]).powi(2)).sum::<f64>();
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    /// Z-scores a `[channels, time]` or `[batch, channels, time]` tensor in place.
    pub fn apply_tensor(&self, x: &mut Tensor) -> Result<()> {
        let v = self.mean.len();
        let ch_axis = x.ndim().checked_sub(2).ok_or_else(|| Error::shape("normalize", "rank", 2, x.ndim()))?;
        if x.dim(ch_axis) != v {
            return Err(Error::shape("normalize", "channels", v, x.dim(ch_axis)));
        }
        let t = x.dim(x.ndim() - 1);
        for (i, row) in x.data_mut().chunks_exact_mut(t).enumerate() {
            let c = i % v;
            let (m, s) = (self.mean[c], self.std[c]);
            row.iter_mut().for_each(|x| *x = (*x - m) / s);
        }
        Ok(())
    }

    pub fn apply(&self, ds: &Dataset) -> Result<Dataset> {
        let mut out = ds.clone();
        for s in &mut out.samples {
            self.apply_tensor(&mut s.values)?;
        }
        out.norm = Some(self.clone());
        Ok(out)
    }
}

/// Normalizes `ds` with statistics fitted elsewhere (normally the training split).
pub fn normalize(ds: &Dataset, stats: &NormStats) -> Result<Dataset> {
    stats.apply(ds)
}

/// Keeps every `factor`-th timestep, starting with the first.
pub fn downsample(ds: &Dataset, factor: usize) -> Result<Dataset> {
    if factor == 0 {
        return Err(Error::Validation("downsample factor must be positive".into()));
    }
    if ds.window % factor != 0 {
        return Err(Error::Validation(format!(
            "window {} is not divisible by downsample factor {factor}",
            ds.window
        )));
    }
    let t = ds.window / factor;
    if t < crate::model::MIN_TIME {
        return Err(Error::Validation(format!(
            "downsampling window {} by {factor} leaves {t} timesteps, need at least {}",
            ds.window,
            crate::model::MIN_TIME
        )));
    }
    let mut out = ds.clone();
    out.window = t;
    for s in &mut out.samples {
        let data: Vec<f64> = s
            .values
            .data()
            .chunks_exact(ds.window)
            .flat_map(|row| row.iter().step_by(factor).copied())
            .collect();
        s.values = Tensor::new(&[ds.channels, t], data)?;
    }
    Ok(out)
}

/// Uniform random subset of `round(fraction * N)` samples without
/// replacement, keeping one sample of every present class when the budget
/// allows. Original order is preserved.
pub fn subsample_train(ds: &Dataset, fraction: f64, seed: u64) -> Result<Dataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::Validation(format!("fraction must be in (0, 1], got {fraction}")));
    }
    let n = ds.len();
    let budget = ((fraction * n as f64).round() as usize).clamp(1.min(n), n);
    let mut rng = seeded_rng(seed);
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);

    let mut chosen = vec![false; n];
    let mut covered = vec![false; ds.num_classes()];
    let mut taken = 0;
    for &i in &order {
        let c = ds.samples[i].class_id;
        if taken < budget && !covered[c] {
            covered[c] = true;
            chosen[i] = true;
            taken += 1;
        }
    }
    for &i in &order {
        if taken == budget {
            break;
        }
        if !chosen[i] {
            chosen[i] = true;
            taken += 1;
        }
    }
    let keep: Vec<usize> = (0..n).filter(|&i| chosen[i]).collect();
    Ok(ds.subset(&keep))
}

/// Splits sample indices per class: about `fraction` of each class goes to
/// the second set. Each class keeps at least one sample in the first set,
/// and classes with five or more samples put at least one in the second.
pub fn stratified_split(ds: &Dataset, fraction: f64, rng: &mut impl Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Validation(format!("split fraction must be in (0, 1), got {fraction}")));
    }
    let mut by_class = vec![Vec::new(); ds.num_classes()];
    for (i, s) in ds.samples.iter().enumerate() {
        by_class[s.class_id].push(i);
    }
    let (mut first, mut second) = (Vec::new(), Vec::new());
    for mut members in by_class {
        let n = members.len();
        if n == 0 {
            continue;
        }
        members.shuffle(rng);
        let mut held = (fraction * n as f64).round() as usize;
        if n >= 5 {
            held = held.max(1);
        }
        held = held.min(n - 1);
        second.extend_from_slice(&members[..held]);
        first.extend_from_slice(&members[held..]);
    }
    first.sort_unstable();
    second.sort_unstable();
    Ok((first, second))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ramp_dataset(n: usize, classes: usize, window: usize) -> Dataset {
        let samples = (0..n)
            .map(|i| TimeSeriesSample {
                values: Tensor::new(&[2, window], (0..2 * window).map(|k| (i * 1000 + k) as f64).collect()).unwrap(),
                class_id: i % classes,
            })
            .collect();
        let names = (0..classes).map(|c| format!("class {c}")).collect();
        Dataset::new(samples, names, 2, window).unwrap()
    }

    #[test]
    fn training_split_is_standardized() {
        let mut rng = seeded_rng(1);
        let samples = (0..20)
            .map(|_| TimeSeriesSample {
                values: Tensor::uniform(&[3, 8], 5.0, &mut rng).map(|x| 2.0 * x + 7.0),
                class_id: 0,
            })
            .collect();
        let ds = Dataset::new(samples, vec!["a".into()], 3, 8).unwrap();
        let stats = NormStats::fit(&ds).unwrap();
        let z = normalize(&ds, &stats).unwrap();
        let again = NormStats::fit(&z).unwrap();
        for c in 0..3 {
            assert!(again.mean[c].abs() < 1e-12);
            assert!((again.std[c] - 1.0).abs() < 1e-12);
        }
        assert_eq!(z.norm.as_ref(), Some(&stats));
    }

    #[test]
    fn constant_channel_becomes_zero() {
        let ds = Dataset::new(
            vec![TimeSeriesSample {
                values: Tensor::full(&[1, 4], 3.5),
                class_id: 0,
            }],
            vec!["a".into()],
            1,
            4,
        )
        .unwrap();
        let stats = NormStats::fit(&ds).unwrap();
        assert_eq!(stats.std, vec![STD_FLOOR]);
        assert!(normalize(&ds, &stats).unwrap().samples[0].values.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn other_split_uses_given_stats() {
        let train = ramp_dataset(4, 2, 6);
        let test = ramp_dataset(3, 2, 6).subset(&[2]);
        let stats = NormStats::fit(&train).unwrap();
        let z = normalize(&test, &stats).unwrap();
        let x = test.samples[0].values.data()[0];
        assert_eq!(z.samples[0].values.data()[0], (x - stats.mean[0]) / stats.std[0]);
    }

    #[test]
    fn downsampling() {
        let ds = ramp_dataset(3, 1, 128);
        let d2 = downsample(&ds, 2).unwrap();
        assert_eq!(d2.window, 64);
        assert_eq!(d2.samples[0].values.shape(), &[2, 64]);
        assert_eq!(d2.samples[1].values.data()[1], ds.samples[1].values.data()[2]);
        assert_eq!(downsample(&ds, 1).unwrap(), ds);
        assert_eq!(downsample(&d2, 2).unwrap(), downsample(&ds, 4).unwrap());
        assert!(downsample(&ramp_dataset(1, 1, 8), 4).unwrap_err().is_validation());
    }

    #[test]
    fn subsampling() {
        let ds = ramp_dataset(100, 4, 4);
        assert_eq!(subsample_train(&ds, 1.0, 3).unwrap(), ds);
        let a = subsample_train(&ds, 0.2, 3).unwrap();
        assert_eq!(a.len(), 20);
        assert_eq!(a, subsample_train(&ds, 0.2, 3).unwrap());
        assert!(a.class_counts().iter().all(|&c| c > 0));
        let tiny = subsample_train(&ds, 0.03, 9).unwrap();
        assert_eq!(tiny.class_counts().iter().filter(|&&c| c > 0).count(), 3);
        assert!(subsample_train(&ds, 0.0, 1).is_err());
    }

    #[test]
    fn stratified_split_keeps_classes() {
        let mut counts = vec![50usize, 50, 5, 2];
        let mut samples = Vec::new();
        for (c, n) in counts.iter_mut().enumerate() {
            for _ in 0..*n {
                samples.push(TimeSeriesSample {
                    values: Tensor::zeros(&[1, 3]),
                    class_id: c,
                });
            }
        }
        let ds = Dataset::new(samples, vec!["a".into(), "b".into(), "c".into(), "d".into()], 1, 3).unwrap();
        let (train, val) = stratified_split(&ds, 0.2, &mut seeded_rng(4)).unwrap();
        assert_eq!(train.len() + val.len(), ds.len());
        assert_eq!(ds.subset(&val).class_counts(), vec![10, 10, 1, 0]);
        assert_eq!(ds.subset(&train).class_counts(), vec![40, 40, 4, 2]);
    }

    #[test]
    fn batch_layout() {
        let ds = ramp_dataset(3, 2, 4);
        let (x, y) = ds.batch(&[2, 0]).unwrap();
        assert_eq!(x.shape(), &[2, 2, 4]);
        assert_eq!(y, vec![0, 0]);
        assert_eq!(x.data()[0], 2000.0);
        assert_eq!(x.data()[8], 0.0);
    }
}
