use std::path::Path;

use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::model::AnyModel;

use super::EVAL_CHUNK;

/// Writes eval-mode encoder features, one row per sample: `f0..f{d-1}`
/// then the label name.
pub fn export_features(model: &AnyModel, dataset: &Dataset, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(file));
    let mut wrote_header = false;
    let n = dataset.len();
    for start in (0..n).step_by(EVAL_CHUNK) {
        let idx: Vec<usize> = (start..(start + EVAL_CHUNK).min(n)).collect();
        let (x, labels) = dataset.batch(&idx)?;
        let z = model.encode(&x)?;
        let d = z.dim(1);
        if !wrote_header {
            let mut header: Vec<String> = (0..d).map(|k| format!("f{k}")).collect();
            header.push("label".into());
            w.write_record(&header)?;
            wrote_header = true;
        }
        for (b, &label) in labels.iter().enumerate() {
            let mut row: Vec<String> = z.row(b).iter().map(|v| format!("{v:?}")).collect();
            row.push(dataset.label_names[label].clone());
            w.write_record(&row)?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_synthetic, SyntheticSpec};
    use crate::model::{EncoderConfig, VanillaModel};
    use crate::numkernel::Mode;
    use crate::seeded_rng;

    #[test]
    fn rows_columns_and_repeatability() {
        let ds = generate_synthetic(&SyntheticSpec::balanced(2, 3, 6, 2, 0.1, 3)).unwrap();
        let cfg = EncoderConfig {
            in_channels: 2,
            widths: [3, 5],
        };
        let mut m = VanillaModel::new(cfg, 2, &mut seeded_rng(1)).unwrap();
        let (x, y) = ds.all().unwrap();
        m.forward(&x, &y, Mode::Train).unwrap();
        m.clear_cache();
        let model = AnyModel::Vanilla(m);
        let dir = tempfile::tempdir().unwrap();
        let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
        export_features(&model, &ds, &a).unwrap();
        export_features(&model, &ds, &b).unwrap();
        let text = std::fs::read_to_string(&a).unwrap();
        assert_eq!(text, std::fs::read_to_string(&b).unwrap());
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines.len(), ds.len() + 1);
        assert!(lines.iter().all(|l| l.split(',').count() == 6));
    }
}
