//! Training, evaluation and the reduced-data experiment suites.

mod config;
mod features;
mod metrics;
mod record;
mod suite;
mod train;

pub use config::TrainConfig;
pub use features::export_features;
pub use metrics::{evaluate_predictions, Metrics};
pub use record::{EpochRecord, RunRecord};
pub use suite::{run_downsample_suite, run_fewshot_suite, SuiteResult, SuiteRow, SuiteSummary};
pub use train::{run_experiment, train_share, train_vanilla, EVAL_CHUNK};

use crate::data::{stratified_split, Dataset, NormStats};
use crate::error::{Error, Result};
use crate::labelspace::LabelSpace;
use crate::model::AnyModel;
use crate::seeded_rng;

/// Generator stream for the train/test split, apart from training's.
const TEST_SPLIT_STREAM: u64 = 2;

/// Scores `model` on `dataset`: constrained decoding for the label-decoding
/// model, argmax for the classifier. Never augments.
pub fn evaluate(model: &AnyModel, dataset: &Dataset, space: &LabelSpace) -> Result<Metrics> {
    let predicted = predict_dataset(model, dataset, space)?;
    Metrics::compute(&dataset.class_ids(), &predicted, dataset.num_classes())
}

/// Predicted class ids for every sample, in order.
pub fn predict_dataset(model: &AnyModel, dataset: &Dataset, space: &LabelSpace) -> Result<Vec<usize>> {
    let mut predicted = Vec::with_capacity(dataset.len());
    let n = dataset.len();
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let (x, _) = dataset.batch(&idx)?;
        predicted.extend(model.predict(&x, space)?);
    }
    Ok(predicted)
}

/// Train pool and test split, both normalized with statistics of the pool.
#[derive(Debug, Clone)]
pub struct Splits {
    pub train_pool: Dataset,
    pub test: Dataset,
    pub norm: NormStats,
}

/// Holds out a stratified `test_fraction` of `dataset` (or uses `test` when
/// given) and normalizes both sides with the pool's statistics.
pub fn prepare_splits(dataset: &Dataset, test: Option<&Dataset>, cfg: &TrainConfig) -> Result<Splits> {
    let (pool, test) = match test {
        Some(t) => {
            if t.label_names != dataset.label_names || t.channels != dataset.channels || t.window != dataset.window {
                return Err(Error::Validation("test data does not match the training data's labels or shape".into()));
            }
            (dataset.clone(), t.clone())
        }
        None => {
            let mut rng = seeded_rng(cfg.seed);
            rng.set_stream(TEST_SPLIT_STREAM);
            let (pool, test) = stratified_split(dataset, cfg.test_fraction, &mut rng)?;
            (dataset.subset(&pool), dataset.subset(&test))
        }
    };
    if pool.is_empty() {
        return Err(Error::Validation("no training samples".into()));
    }
    let norm = NormStats::fit(&pool)?;
    Ok(Splits {
        train_pool: norm.apply(&pool)?,
        test: norm.apply(&test)?,
        norm,
    })
}
