//! Canonical CSV format: header `subject,timestamp,label,ch0,..,ch{v-1}`,
//! one row per timestep. Consecutive rows with the same subject and label
//! form a run; runs are cut into fixed-length windows.

use std::path::Path;

use log::warn;

use super::{Dataset, TimeSeriesSample};
use crate::error::{Error, Result};
use crate::labelspace::read_label_file;
use crate::numkernel::Tensor;

const FIXED_COLUMNS: [&str; 3] = ["subject", "timestamp", "label"];

/// One window cut from a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Window {
    pub subject: String,
    pub label: String,
    /// 1-based file line of the window's first row.
    pub line: usize,
    /// `[channels, window]`.
    pub values: Tensor,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsvWindows {
    pub channels: usize,
    pub windows: Vec<Window>,
}

struct Run {
    subject: String,
    label: String,
    line: usize,
    rows: Vec<Vec<f64>>,
}

/// Reads a CSV file and cuts every run into windows. Runs shorter than
/// `window` are skipped with a warning.
pub fn read_windows(path: &Path, window: usize, stride: usize) -> Result<CsvWindows> {
    if window == 0 || stride == 0 {
        return Err(Error::Validation("window and stride must be positive".into()));
    }
    let fmt_err = |line: usize, msg: String| Error::Format {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => fmt_err(1, format!("{other:?}")),
        })?;
    let header = reader.headers()?.clone();
    let width = header.len();
    if width < 4 || header.iter().take(3).ne(FIXED_COLUMNS) {
        return Err(fmt_err(
            1,
            format!("header must be subject,timestamp,label,ch0,.. got {:?}", header.iter().collect::<Vec<_>>()),
        ));
    }
    let channels = width - 3;

    let mut runs: Vec<Run> = Vec::new();
    for rec in reader.records() {
        let rec = rec?;
        let line = rec.position().map(|p| p.line() as usize).unwrap_or(0);
        if rec.len() != width {
            return Err(fmt_err(line, format!("expected {width} fields, found {}", rec.len())));
        }
        let values = rec
            .iter()
            .skip(3)
            .map(|f| match f.parse::<f64>() {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(fmt_err(line, format!("non-finite value {v}"))),
                Err(e) => Err(fmt_err(line, format!("bad value {f:?}: {e}"))),
            })
            .collect::<Result<Vec<f64>>>()?;
        let (subject, label) = (&rec[0], &rec[2]);
        match runs.last_mut() {
            Some(run) if run.subject == subject && run.label == label => run.rows.push(values),
            _ => runs.push(Run {
                subject: subject.to_string(),
                label: label.to_string(),
                line,
                rows: vec![values],
            }),
        }
    }

    let mut windows = Vec::new();
    for run in runs {
        if run.rows.len() < window {
            warn!(
                "{}:{}: run of {} rows ({:?}, subject {}) is shorter than window {window}; skipped",
                path.display(),
                run.line,
                run.rows.len(),
                run.label,
                run.subject
            );
            continue;
        }
        let mut start = 0;
        while start + window <= run.rows.len() {
            let mut data = vec![0.0; channels * window];
            for (t, row) in run.rows[start..start + window].iter().enumerate() {
                for (c, &v) in row.iter().enumerate() {
                    data[c * window + t] = v;
                }
            }
            windows.push(Window {
                subject: run.subject.clone(),
                label: run.label.clone(),
                line: run.line + start,
                values: Tensor::new(&[channels, window], data)?,
            });
            start += stride;
        }
    }
    Ok(CsvWindows { channels, windows })
}

/// Windows a CSV file and maps its label strings onto `label_names` (line
/// order in the label file gives the class id).
pub fn load_dataset_with_names(path: &Path, label_names: &[String], window: usize, stride: usize) -> Result<Dataset> {
    let cw = read_windows(path, window, stride)?;
    let mut samples = Vec::with_capacity(cw.windows.len());
    for w in cw.windows {
        let class_id = label_names.iter().position(|n| *n == w.label).ok_or_else(|| Error::Format {
            path: path.to_path_buf(),
            line: w.line,
            msg: format!("label {:?} is not in the label file", w.label),
        })?;
        samples.push(TimeSeriesSample {
            values: w.values,
            class_id,
        });
    }
    Dataset::new(samples, label_names.to_vec(), cw.channels, window)
}

pub fn load_dataset(data_path: &Path, labels_path: &Path, window: usize, stride: usize) -> Result<Dataset> {
    let names = read_label_file(labels_path)?;
    load_dataset_with_names(data_path, &names, window, stride)
}

/// Writes each sample as its own run (subject = sample index), so reading
/// back with `window = stride = ds.window` recovers the samples.
pub fn write_dataset_csv(path: &Path, ds: &Dataset) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut header: Vec<String> = FIXED_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend((0..ds.channels).map(|c| format!("ch{c}")));
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for (i, s) in ds.samples.iter().enumerate() {
        let name = &ds.label_names[s.class_id];
        for t in 0..ds.window {
            row.clear();
            row.push(i.to_string());
            row.push(t.to_string());
            row.push(name.clone());
            // `{:?}` prints the shortest string that parses back to the same f64
            row.extend((0..ds.channels).map(|c| format!("{:?}", s.values.data()[c * ds.window + t])));
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}
