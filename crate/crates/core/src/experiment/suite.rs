//! Paired SHARE / classifier runs over reduced training data, either fewer
//! samples or lower sampling rates. Cells run in parallel; results come
//! back in a fixed order regardless of scheduling.

use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{run_experiment, RunRecord, TrainConfig};
use crate::data::{downsample, subsample_train, Dataset};
use crate::error::{Error, Result};
use crate::labelspace::LabelSpace;
use crate::model::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteRow {
    pub suite: String,
    pub model: ModelKind,
    /// Training fraction or downsampling factor.
    pub setting: f64,
    pub seed: u64,
    pub record: RunRecord,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteSummary {
    pub model: ModelKind,
    pub setting: f64,
    pub runs: usize,
    pub accuracy_mean: f64,
    pub accuracy_std: f64,
    pub macro_f1_mean: f64,
    pub macro_f1_std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub rows: Vec<SuiteRow>,
    pub summary: Vec<SuiteSummary>,
}

const MODELS: [ModelKind; 2] = [ModelKind::Share, ModelKind::Vanilla];

fn cell(
    suite: &str,
    setting: f64,
    seed: u64,
    train: &Dataset,
    test: &Dataset,
    space: &LabelSpace,
    base: &TrainConfig,
) -> Result<Vec<SuiteRow>> {
    let cfg = TrainConfig {
        seed,
        ..base.clone()
    };
    MODELS
        .iter()
        .map(|&kind| {
            let (_, record) = run_experiment(kind, train, test, space, &cfg)?;
            Ok(SuiteRow {
                suite: suite.to_string(),
                model: kind,
                setting,
                seed,
                record,
            })
        })
        .collect()
}

/// For each fraction and seed: subsample the pool, train both models, score
/// on the untouched test split. `|fractions| * |seeds| * 2` rows.
pub fn run_fewshot_suite(
    train_pool: &Dataset,
    test: &Dataset,
    space: &LabelSpace,
    fractions: &[f64],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<SuiteResult> {
    if let Some(f) = fractions.iter().find(|&&f| !(f > 0.0 && f <= 1.0)) {
        return Err(Error::Validation(format!("fraction {f} is outside (0, 1]")));
    }
    let cells: Vec<(f64, u64)> = fractions.iter().flat_map(|&f| seeds.iter().map(move |&s| (f, s))).collect();
    let rows = cells
        .par_iter()
        .map(|&(fraction, seed)| {
            let train = subsample_train(train_pool, fraction, seed)?;
            cell("fewshot", fraction, seed, &train, test, space, base)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(rows.into_iter().flatten().collect()))
}

/// For each factor and seed: downsample train and test, train both models,
/// score. Factors that leave too few timesteps are skipped with a warning.
pub fn run_downsample_suite(
    train_pool: &Dataset,
    test: &Dataset,
    space: &LabelSpace,
    factors: &[usize],
    seeds: &[u64],
    base: &TrainConfig,
) -> Result<SuiteResult> {
    let mut prepared = Vec::new();
    for &factor in factors {
        match (downsample(train_pool, factor), downsample(test, factor)) {
            (Ok(tr), Ok(te)) => prepared.push((factor, tr, te)),
            (Err(e), _) | (_, Err(e)) if e.is_validation() => warn!("skipping downsample factor {factor}: {e}"),
            (Err(e), _) | (_, Err(e)) => return Err(e),
        }
    }
    let cells: Vec<(usize, u64)> = (0..prepared.len())
        .flat_map(|i| seeds.iter().map(move |&s| (i, s)))
        .collect();
    let rows = cells
        .par_iter()
        .map(|&(i, seed)| {
            let (factor, train, test) = &prepared[i];
            cell("downsample", *factor as f64, seed, train, test, space, base)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(finish(rows.into_iter().flatten().collect()))
}

fn mean_std(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

fn finish(rows: Vec<SuiteRow>) -> SuiteResult {
    let mut settings: Vec<f64> = Vec::new();
    for r in &rows {
        if !settings.contains(&r.setting) {
            settings.push(r.setting);
        }
    }
    let mut summary = Vec::new();
    for &setting in &settings {
        for kind in MODELS {
            let metrics: Vec<_> = rows
                .iter()
                .filter(|r| r.setting == setting && r.model == kind)
                .filter_map(|r| r.record.test.as_ref())
                .collect();
            if metrics.is_empty() {
                continue;
            }
            let (accuracy_mean, accuracy_std) = mean_std(&metrics.iter().map(|m| m.accuracy).collect::<Vec<_>>());
            let (macro_f1_mean, macro_f1_std) = mean_std(&metrics.iter().map(|m| m.macro_f1).collect::<Vec<_>>());
            summary.push(SuiteSummary {
                model: kind,
                setting,
                runs: metrics.len(),
                accuracy_mean,
                accuracy_std,
                macro_f1_mean,
                macro_f1_std,
            });
        }
    }
    SuiteResult { rows, summary }
}

#[derive(Serialize)]
struct FlatRow<'a> {
    suite: &'a str,
    model: ModelKind,
    setting: f64,
    seed: u64,
    accuracy: Option<f64>,
    macro_f1: Option<f64>,
    best_epoch: Option<usize>,
    parameters: usize,
}

impl SuiteResult {
    /// One CSV row per run.
    pub fn write_rows_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for r in &self.rows {
            w.serialize(FlatRow {
                suite: &r.suite,
                model: r.model,
                setting: r.setting,
                seed: r.seed,
                accuracy: r.record.test.as_ref().map(|m| m.accuracy),
                macro_f1: r.record.test.as_ref().map(|m| m.macro_f1),
                best_epoch: r.record.best_epoch,
                parameters: r.record.parameters,
            })?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// Mean and standard deviation per setting and model.
    pub fn write_summary_csv(&self, path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        for s in &self.summary {
            w.serialize(s)?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    /// One JSON run record per line.
    pub fn write_jsonl(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(file);
        for r in &self.rows {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }
}
