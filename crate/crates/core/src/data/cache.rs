//! Windowed datasets stored in the checkpoint container for fast reload.

use std::path::Path;

use super::{Dataset, NormStats, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::numkernel::{Checkpoint, Tensor};

pub fn save_dataset_cache(path: &Path, ds: &Dataset) -> Result<()> {
    if ds.is_empty() {
        return Err(Error::Validation("cannot cache an empty dataset".into()));
    }
    let mut ck = Checkpoint::new();
    ck.meta.insert("kind".into(), "dataset".into());
    ck.meta.insert("label_names".into(), serde_json::to_string(&ds.label_names)?);
    ck.meta.insert("channels".into(), ds.channels.to_string());
    ck.meta.insert("window".into(), ds.window.to_string());
    if let Some(norm) = &ds.norm {
        ck.meta.insert("norm".into(), serde_json::to_string(norm)?);
    }
    let (x, y) = ds.all()?;
    ck.push("values", x);
    ck.push("class_ids", Tensor::new(&[y.len()], y.iter().map(|&c| c as f64).collect())?);
    ck.save(path)
}

pub fn load_dataset_cache(path: &Path) -> Result<Dataset> {
    let mut ck = Checkpoint::load(path)?;
    let meta = |key: &str| {
        ck.meta
            .get(key)
            .cloned()
            .ok_or_else(|| Error::Validation(format!("{}: dataset cache lacks {key}", path.display())))
    };
    if meta("kind")? != "dataset" {
        return Err(Error::Validation(format!("{} is not a dataset cache", path.display())));
    }
    let label_names: Vec<String> = serde_json::from_str(&meta("label_names")?)?;
    let parse = |s: String| s.parse::<usize>().map_err(|e| Error::Validation(format!("bad cache metadata: {e}")));
    let channels = parse(meta("channels")?)?;
    let window = parse(meta("window")?)?;
    let norm: Option<NormStats> = ck.meta.get("norm").map(|s| serde_json::from_str(s)).transpose()?;
    let x = ck.take("values")?;
    let y = ck.take("class_ids")?;
    let n = y.len();
    x.expect_shape("dataset cache", &["n", "channels", "window"], &[n, channels, window])?;
    let per = channels * window;
    let samples = x
        .data()
        .chunks_exact(per)
        .zip(y.data())
        .map(|(v, &c)| {
            Ok(TimeSeriesSample {
                values: Tensor::new(&[channels, window], v.to_vec())?,
                class_id: c as usize,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ds = Dataset::new(samples, label_names, channels, window)?;
    ds.norm = norm;
    Ok(ds)
}
