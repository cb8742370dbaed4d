use serde::{Deserialize, Serialize};

use super::{Metrics, TrainConfig};
use crate::model::ModelKind;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_loss: f64,
    pub val_macro_f1: f64,
}

/// Everything a training run reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub model: ModelKind,
    pub config: TrainConfig,
    pub seed: u64,
    pub epochs: Vec<EpochRecord>,
    /// Epoch whose parameters were kept (highest validation macro-F1,
    /// earliest on ties).
    pub best_epoch: Option<usize>,
    /// Epochs of the train + validation retraining, when enabled.
    pub retrain_epochs: Option<usize>,
    pub test: Option<Metrics>,
    pub parameters: usize,
    pub label_space_hash: Option<String>,
    /// Not deterministic; stored apart from the record by the command-line tool.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub wall_clock_secs: Option<f64>,
}

impl RunRecord {
    pub fn to_json(&self) -> serde_json::Result<String> {
        serde_json::to_string_pretty(self)
    }

    pub fn from_json(text: &str) -> serde_json::Result<Self> {
        serde_json::from_str(text)
    }

    /// Copy without the wall-clock field.
    pub fn without_timing(&self) -> Self {
        Self {
            wall_clock_secs: None,
            ..self.clone()
        }
    }
}
