//! Mini-batch training with Adam and best-epoch selection on a stratified
//! validation split.

use log::{info, warn};
use rand::seq::SliceRandom;

use super::{evaluate, EpochRecord, Metrics, RunRecord, TrainConfig};
use crate::data::{stratified_split, Dataset};
use crate::error::{Error, Result};
use crate::labelspace::{augment_label, load_embeddings, LabelSpace};
use crate::model::{AnyModel, EncoderConfig, ModelKind, ShareModel, VanillaModel};
use crate::numkernel::{AdamConfig, AdamState, Mode, Parameterized, Tensor};
use crate::{seeded_rng, SeededRng};

/// Samples per forward pass when scoring whole splits.
pub const EVAL_CHUNK: usize = 256;

/// Stream of the generator used for `retrain_full`, kept apart from the
/// main run so the tuning phase is unaffected.
const RETRAIN_STREAM: u64 = 1;

trait Learner: Clone {
    /// Forward and backward on one batch; gradients are left in the
    /// parameters. Returns the batch loss.
    fn train_batch(&mut self, x: &Tensor, labels: &[usize], rng: &mut SeededRng) -> Result<f64>;
    fn eval_loss(&mut self, x: &Tensor, labels: &[usize]) -> Result<f64>;
    fn predict(&self, x: &Tensor) -> Result<Vec<usize>>;
    fn params(&mut self) -> Vec<&mut Tensor>;
}

#[derive(Clone)]
struct ShareLearner<'a> {
    model: ShareModel,
    space: &'a LabelSpace,
    p_aug: f64,
}

impl Learner for ShareLearner<'_> {
    fn train_batch(&mut self, x: &Tensor, labels: &[usize], rng: &mut SeededRng) -> Result<f64> {
        let targets: Vec<Vec<usize>> = labels
            .iter()
            .map(|&c| augment_label(self.space.sequence(c), self.space, self.p_aug, rng))
            .collect();
        let loss = self.model.teacher_forced_loss(x, &targets, Mode::Train)?;
        self.model.zero_grad();
        self.model.backward()?;
        Ok(loss)
    }

    fn eval_loss(&mut self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        let targets: Vec<Vec<usize>> = labels.iter().map(|&c| self.space.sequence(c).tokens.clone()).collect();
        self.model.teacher_forced_loss(x, &targets, Mode::Eval)
    }

    fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        Ok(crate::model::constrained_decode(&self.model, x, self.space)?
            .into_iter()
            .map(|r| r.class_id)
            .collect())
    }

    fn params(&mut self) -> Vec<&mut Tensor> {
        self.model.params_mut().into_iter().map(|(_, t)| t).collect()
    }
}

#[derive(Clone)]
struct VanillaLearner {
    model: VanillaModel,
}

impl Learner for VanillaLearner {
    fn train_batch(&mut self, x: &Tensor, labels: &[usize], _rng: &mut SeededRng) -> Result<f64> {
        let (loss, _) = self.model.forward(x, labels, Mode::Train)?;
        self.model.zero_grad();
        self.model.backward()?;
        Ok(loss)
    }

    fn eval_loss(&mut self, x: &Tensor, labels: &[usize]) -> Result<f64> {
        Ok(self.model.forward(x, labels, Mode::Eval)?.0)
    }

    fn predict(&self, x: &Tensor) -> Result<Vec<usize>> {
        self.model.predict(x)
    }

    fn params(&mut self) -> Vec<&mut Tensor> {
        self.model.params_mut().into_iter().map(|(_, t)| t).collect()
    }
}

fn chunks(n: usize, size: usize) -> impl Iterator<Item = Vec<usize>> {
    (0..n).step_by(size).map(move |s| (s..(s + size).min(n)).collect())
}

/// Mean loss and macro-F1 over a whole split.
fn score(learner: &mut impl Learner, ds: &Dataset) -> Result<(f64, f64)> {
    let mut loss = 0.0;
    let mut predicted = Vec::with_capacity(ds.len());
    for idx in chunks(ds.len(), EVAL_CHUNK) {
        let (x, y) = ds.batch(&idx)?;
        loss += learner.eval_loss(&x, &y)? * idx.len() as f64;
        predicted.extend(learner.predict(&x)?);
    }
    let metrics = Metrics::compute(&ds.class_ids(), &predicted, ds.num_classes())?;
    Ok((loss / ds.len() as f64, metrics.macro_f1))
}

fn run_epoch(learner: &mut impl Learner, adam: &mut AdamState, train: &Dataset, batch: usize, rng: &mut SeededRng) -> Result<f64> {
    let mut order: Vec<usize> = (0..train.len()).collect();
    order.shuffle(rng);
    let mut total = 0.0;
    for idx in order.chunks(batch) {
        let (x, y) = train.batch(idx)?;
        total += learner.train_batch(&x, &y, rng)? * idx.len() as f64;
        adam.update(&mut learner.params())?;
    }
    Ok(total / train.len() as f64)
}

struct Fit<L> {
    learner: L,
    epochs: Vec<EpochRecord>,
    best_epoch: Option<usize>,
}

fn fit<L: Learner>(mut learner: L, train: &Dataset, val: &Dataset, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<Fit<L>> {
    let select_on = if val.is_empty() {
        warn!("validation split is empty; selecting the epoch on training data");
        train
    } else {
        val
    };
    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, L)> = None;
    for epoch in 0..cfg.epochs {
        let train_loss = run_epoch(&mut learner, &mut adam, train, cfg.batch_size, rng)?;
        let (val_loss, val_macro_f1) = score(&mut learner, select_on)?;
        info!("epoch {epoch}: train loss {train_loss:.5}, val loss {val_loss:.5}, val macro-F1 {val_macro_f1:.4}");
        epochs.push(EpochRecord {
            epoch,
            train_loss,
            val_loss,
            val_macro_f1,
        });
        if best.as_ref().is_none_or(|(_, f1, _)| val_macro_f1 > *f1) {
            best = Some((epoch, val_macro_f1, learner.clone()));
        }
    }
    Ok(match best {
        Some((e, _, l)) => Fit {
            learner: l,
            epochs,
            best_epoch: Some(e),
        },
        None => Fit {
            learner,
            epochs,
            best_epoch: None,
        },
    })
}

/// Stratified train/validation split; every class must keep training samples.
fn split(ds: &Dataset, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<(Dataset, Dataset)> {
    cfg.validate()?;
    let (train_idx, val_idx) = stratified_split(ds, cfg.val_fraction, rng)?;
    let train = ds.subset(&train_idx);
    if let Some(c) = train.class_counts().iter().position(|&n| n == 0) {
        return Err(Error::Validation(format!(
            "class {:?} has no training samples",
            ds.label_names[c]
        )));
    }
    Ok((train, ds.subset(&val_idx)))
}

fn encoder_config(ds: &Dataset, cfg: &TrainConfig) -> EncoderConfig {
    EncoderConfig {
        in_channels: ds.channels,
        widths: cfg.widths,
    }
}

fn new_share(ds: &Dataset, space: &LabelSpace, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<ShareModel> {
    let emb = load_embeddings(cfg.embeddings.as_deref(), space, cfg.embed_dim, rng)?;
    ShareModel::new(encoder_config(ds, cfg), cfg.hidden, &emb, rng)
}

fn base_record(kind: ModelKind, cfg: &TrainConfig, parameters: usize) -> RunRecord {
    RunRecord {
        model: kind,
        config: cfg.clone(),
        seed: cfg.seed,
        epochs: Vec::new(),
        best_epoch: None,
        retrain_epochs: None,
        test: None,
        parameters,
        label_space_hash: None,
        wall_clock_secs: None,
    }
}

/// Trains the label-decoding model on `dataset` (already windowed and
/// normalized). Augmentation draws a fresh target per sample per batch;
/// validation always scores the original names by constrained decoding.
pub fn train_share(dataset: &Dataset, space: &LabelSpace, cfg: &TrainConfig) -> Result<(ShareModel, RunRecord)> {
    if space.num_classes() != dataset.num_classes() {
        return Err(Error::shape("train_share", "classes", dataset.num_classes(), space.num_classes()));
    }
    let mut rng = seeded_rng(cfg.seed);
    let (train, val) = split(dataset, cfg, &mut rng)?;
    let model = new_share(dataset, space, cfg, &mut rng)?;
    let learner = ShareLearner {
        model,
        space,
        p_aug: cfg.p_aug,
    };
    let fit = fit(learner, &train, &val, cfg, &mut rng)?;
    let mut model = fit.learner.model;
    let mut record = base_record(ModelKind::Share, cfg, model.num_parameters());
    record.label_space_hash = Some(space.fingerprint());
    record.epochs = fit.epochs;
    record.best_epoch = fit.best_epoch;

    if let (true, Some(best)) = (cfg.retrain_full, fit.best_epoch) {
        let mut rng = seeded_rng(cfg.seed);
        rng.set_stream(RETRAIN_STREAM);
        let learner = ShareLearner {
            model: new_share(dataset, space, cfg, &mut rng)?,
            space,
            p_aug: cfg.p_aug,
        };
        model = retrain(learner, dataset, best + 1, cfg, &mut rng)?.model;
        record.retrain_epochs = Some(best + 1);
    }
    Ok((model, record))
}

/// Trains the plain classifier with the same loop, split and selection rule.
pub fn train_vanilla(dataset: &Dataset, cfg: &TrainConfig) -> Result<(VanillaModel, RunRecord)> {
    let mut rng = seeded_rng(cfg.seed);
    let (train, val) = split(dataset, cfg, &mut rng)?;
    let model = VanillaModel::new(encoder_config(dataset, cfg), dataset.num_classes(), &mut rng)?;
    let fit = fit(VanillaLearner { model }, &train, &val, cfg, &mut rng)?;
    let mut model = fit.learner.model;
    let mut record = base_record(ModelKind::Vanilla, cfg, model.num_parameters());
    record.epochs = fit.epochs;
    record.best_epoch = fit.best_epoch;

    if let (true, Some(best)) = (cfg.retrain_full, fit.best_epoch) {
        let mut rng = seeded_rng(cfg.seed);
        rng.set_stream(RETRAIN_STREAM);
        let fresh = VanillaModel::new(encoder_config(dataset, cfg), dataset.num_classes(), &mut rng)?;
        model = retrain(VanillaLearner { model: fresh }, dataset, best + 1, cfg, &mut rng)?.model;
        record.retrain_epochs = Some(best + 1);
    }
    Ok((model, record))
}

fn retrain<L: Learner>(mut learner: L, ds: &Dataset, epochs: usize, cfg: &TrainConfig, rng: &mut SeededRng) -> Result<L> {
    let mut adam = AdamState::new(AdamConfig {
        lr: cfg.lr,
        ..AdamConfig::default()
    });
    for _ in 0..epochs {
        run_epoch(&mut learner, &mut adam, ds, cfg.batch_size, rng)?;
    }
    Ok(learner)
}

/// Trains one model kind and scores it on `test`.
pub fn run_experiment(
    kind: ModelKind,
    train_pool: &Dataset,
    test: &Dataset,
    space: &LabelSpace,
    cfg: &TrainConfig,
) -> Result<(AnyModel, RunRecord)> {
    let start = std::time::Instant::now();
    let (model, mut record) = match kind {
        ModelKind::Share => {
            let (m, r) = train_share(train_pool, space, cfg)?;
            (AnyModel::Share(m), r)
        }
        ModelKind::Vanilla => {
            let (m, r) = train_vanilla(train_pool, cfg)?;
            (AnyModel::Vanilla(m), r)
        }
    };
    if !test.is_empty() {
        record.test = Some(evaluate(&model, test, space)?);
    }
    record.wall_clock_secs = Some(start.elapsed().as_secs_f64());
    Ok((model, record))
}
