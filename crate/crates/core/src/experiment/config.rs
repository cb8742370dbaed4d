use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Every knob of a training run. Settable by key through [`TrainConfig::set`],
/// which is what config files and command-line overrides go through.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub p_aug: f64,
    pub val_fraction: f64,
    /// Held-out test share when no separate test file is given.
    pub test_fraction: f64,
    pub seed: u64,
    pub window: Option<usize>,
    /// Defaults to the window (non-overlapping windows).
    pub stride: Option<usize>,
    pub widths: [usize; 2],
    pub hidden: usize,
    /// Embedding size when no word-vector file is given.
    pub embed_dim: usize,
    pub stop_tokens: Vec<String>,
    pub data: Option<PathBuf>,
    /// Prepared dataset cache, used instead of `data` and `labels`.
    pub cache: Option<PathBuf>,
    pub labels: Option<PathBuf>,
    pub test_data: Option<PathBuf>,
    pub embeddings: Option<PathBuf>,
    pub label_map: Option<PathBuf>,
    /// After selecting the best epoch, retrain on train + validation for
    /// that many epochs.
    pub retrain_full: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 30,
            batch_size: 16,
            lr: 1e-4,
            p_aug: 0.5,
            val_fraction: 0.2,
            test_fraction: 0.2,
            seed: 0,
            window: None,
            stride: None,
            widths: [64, 128],
            hidden: 128,
            embed_dim: 64,
            stop_tokens: Vec::new(),
            data: None,
            cache: None,
            labels: None,
            test_data: None,
            embeddings: None,
            label_map: None,
            retrain_full: false,
        }
    }
}

impl TrainConfig {
    pub const KEYS: &'static [&'static str] = &[
        "epochs",
        "batch_size",
        "lr",
        "p_aug",
        "val_fraction",
        "test_fraction",
        "seed",
        "window",
        "stride",
        "widths",
        "hidden",
        "embed_dim",
        "stop_tokens",
        "data",
        "cache",
        "labels",
        "test_data",
        "embeddings",
        "label_map",
        "retrain_full",
    ];

    pub fn is_key(key: &str) -> bool {
        Self::KEYS.contains(&key)
    }

    /// Sets one field from its textual value. Lists are comma separated.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        let bad = |e: &dyn std::fmt::Display| Error::Config(format!("invalid value {value:?} for {key}: {e}"));
        fn num<T: std::str::FromStr>(v: &str) -> std::result::Result<T, T::Err> {
            v.parse::<T>()
        }
        let path = || (!value.is_empty()).then(|| PathBuf::from(value));
        match key {
            "epochs" => self.epochs = num(value).map_err(|e| bad(&e))?,
            "batch_size" => self.batch_size = num(value).map_err(|e| bad(&e))?,
            "lr" => self.lr = num(value).map_err(|e| bad(&e))?,
            "p_aug" => self.p_aug = num(value).map_err(|e| bad(&e))?,
            "val_fraction" => self.val_fraction = num(value).map_err(|e| bad(&e))?,
            "test_fraction" => self.test_fraction = num(value).map_err(|e| bad(&e))?,
            "seed" => self.seed = num(value).map_err(|e| bad(&e))?,
            "window" => self.window = Some(num(value).map_err(|e| bad(&e))?),
            "stride" => self.stride = Some(num(value).map_err(|e| bad(&e))?),
            "widths" => {
                let parts: Vec<usize> = value
                    .split(',')
                    .map(|p| num(p.trim()))
                    .collect::<std::result::Result<_, _>>()
                    .map_err(|e| bad(&e))?;
                self.widths = parts.try_into().map_err(|_| bad(&"expected two comma-separated widths"))?;
            }
            "hidden" => self.hidden = num(value).map_err(|e| bad(&e))?,
            "embed_dim" => self.embed_dim = num(value).map_err(|e| bad(&e))?,
            "stop_tokens" => {
                self.stop_tokens = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::to_string)
                    .collect()
            }
            "data" => self.data = path(),
            "cache" => self.cache = path(),
            "labels" => self.labels = path(),
            "test_data" => self.test_data = path(),
            "embeddings" => self.embeddings = path(),
            "label_map" => self.label_map = path(),
            "retrain_full" => self.retrain_full = num(value).map_err(|e| bad(&e))?,
            _ => return Err(Error::Config(format!("unknown config key {key:?}"))),
        }
        Ok(())
    }

    /// Parses `key = value` lines; `#` starts a comment. All unknown keys
    /// are reported together.
    pub fn apply_kv_text(&mut self, text: &str) -> Result<()> {
        let mut unknown = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected key = value, got {raw:?}", i + 1)))?;
            let k = k.trim();
            if !Self::is_key(k) {
                unknown.push(k.to_string());
                continue;
            }
            self.set(k, v)?;
        }
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config keys: {}", unknown.join(", "))));
        }
        Ok(())
    }

    /// `key = value` lines for every set field, in [`TrainConfig::KEYS`] order;
    /// reading them back with [`TrainConfig::apply_kv_text`] restores the config.
    pub fn to_kv_text(&self) -> String {
        let opt = |v: Option<String>| v.unwrap_or_default();
        let path = |p: &Option<PathBuf>| opt(p.as_ref().map(|p| p.display().to_string()));
        let mut out = String::new();
        for key in Self::KEYS {
            let value = match *key {
                "epochs" => self.epochs.to_string(),
                "batch_size" => self.batch_size.to_string(),
                "lr" => format!("{:?}", self.lr),
                "p_aug" => format!("{:?}", self.p_aug),
                "val_fraction" => format!("{:?}", self.val_fraction),
                "test_fraction" => format!("{:?}", self.test_fraction),
                "seed" => self.seed.to_string(),
                "window" => opt(self.window.map(|w| w.to_string())),
                "stride" => opt(self.stride.map(|w| w.to_string())),
                "widths" => format!("{},{}", self.widths[0], self.widths[1]),
                "hidden" => self.hidden.to_string(),
                "embed_dim" => self.embed_dim.to_string(),
                "stop_tokens" => self.stop_tokens.join(","),
                "data" => path(&self.data),
                "cache" => path(&self.cache),
                "labels" => path(&self.labels),
                "test_data" => path(&self.test_data),
                "embeddings" => path(&self.embeddings),
                "label_map" => path(&self.label_map),
                "retrain_full" => self.retrain_full.to_string(),
                _ => unreachable!("every key is listed"),
            };
            if !value.is_empty() {
                out.push_str(&format!("{key} = {value}\n"));
            }
        }
        out
    }

    pub fn stride_or_window(&self) -> Option<usize> {
        self.stride.or(self.window)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1".into());
        }
        if !(self.val_fraction > 0.0 && self.val_fraction < 1.0) {
            return bad(format!("val_fraction must be in (0, 1), got {}", self.val_fraction));
        }
        if !(self.test_fraction > 0.0 && self.test_fraction < 1.0) {
            return bad(format!("test_fraction must be in (0, 1), got {}", self.test_fraction));
        }
        if !(0.0..=1.0).contains(&self.p_aug) {
            return bad(format!("p_aug must be in [0, 1], got {}", self.p_aug));
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("lr must be positive, got {}", self.lr));
        }
        if self.hidden == 0 || self.embed_dim == 0 || self.widths.contains(&0) {
            return bad("layer sizes must be positive".into());
        }
        if self.window == Some(0) || self.stride == Some(0) {
            return bad("window and stride must be positive".into());
        }
        Ok(())
    }
}
