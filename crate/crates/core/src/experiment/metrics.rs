use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Classification metrics; `confusion[truth][prediction]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub accuracy: f64,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
    pub f1: Vec<f64>,
    pub macro_f1: f64,
    pub confusion: Vec<Vec<usize>>,
}

impl Metrics {
    /// Precision and recall are 0 for a class with no predictions or no
    /// true samples; F1 is `2 TP / (2 TP + FP + FN)`, 0 when that is 0/0.
    pub fn compute(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Self> {
        if truth.len() != predicted.len() {
            return Err(Error::shape("metrics", "length", truth.len(), predicted.len()));
        }
        if truth.is_empty() {
            return Err(Error::Validation("no predictions to score".into()));
        }
        let mut confusion = vec![vec![0usize; num_classes]; num_classes];
        for (&t, &p) in truth.iter().zip(predicted) {
            let bad = t.max(p);
            if bad >= num_classes {
                return Err(Error::Index {
                    what: "class id",
                    index: bad,
                    limit: num_classes,
                });
            }
            confusion[t][p] += 1;
        }
        let mut precision = Vec::with_capacity(num_classes);
        let mut recall = Vec::with_capacity(num_classes);
        let mut f1 = Vec::with_capacity(num_classes);
        let mut f1_ratios = Vec::with_capacity(num_classes);
        let mut correct = 0;
        for c in 0..num_classes {
            let tp = confusion[c][c];
            let predicted_c: usize = confusion.iter().map(|row| row[c]).sum();
            let true_c: usize = confusion[c].iter().sum();
            correct += tp;
            precision.push(ratio(tp, predicted_c));
            recall.push(ratio(tp, true_c));
            f1.push(ratio(2 * tp, predicted_c + true_c));
            f1_ratios.push((2 * tp as u64, (predicted_c + true_c) as u64));
        }
        Ok(Self {
            accuracy: correct as f64 / truth.len() as f64,
            macro_f1: mean_of_ratios(&f1_ratios).unwrap_or_else(|| f1.iter().sum::<f64>() / num_classes as f64),
            precision,
            recall,
            f1,
            confusion,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.confusion.len()
    }

    /// Confusion matrix as CSV with a `truth\predicted` header row of names.
    pub fn confusion_csv(&self, names: &[String]) -> String {
        let mut out = String::from("truth\\predicted");
        for n in names {
            out.push(',');
            out.push_str(&csv_field(n));
        }
        out.push('\n');
        for (name, row) in names.iter().zip(&self.confusion) {
            out.push_str(&csv_field(name));
            for v in row {
                out.push_str(&format!(",{v}"));
            }
            out.push('\n');
        }
        out
    }
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}

/// Mean of `num / den` terms (0/0 counts as 0) summed as an exact fraction
/// and rounded once, so e.g. the mean of 2/3 and 4/5 is the nearest f64 to
/// 11/15. `None` if the fraction outgrows exact f64 integers.
fn mean_of_ratios(terms: &[(u64, u64)]) -> Option<f64> {
    let (mut num, mut den) = (0u128, 1u128);
    for &(n, d) in terms {
        if d == 0 {
            continue;
        }
        let (n, d) = (n as u128, d as u128);
        let g = gcd(den, d);
        let lcm = den.checked_mul(d / g)?;
        num = num.checked_mul(lcm / den)?.checked_add(n.checked_mul(lcm / d)?)?;
        den = lcm;
        let g = gcd(num, den).max(1);
        num /= g;
        den /= g;
    }
    let den = den.checked_mul(terms.len().max(1) as u128)?;
    const EXACT: u128 = 1 << 53;
    (num < EXACT && den < EXACT).then(|| num as f64 / den as f64)
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub fn evaluate_predictions(truth: &[usize], predicted: &[usize], num_classes: usize) -> Result<Metrics> {
    Metrics::compute(truth, predicted, num_classes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_computed_case() {
        let m = Metrics::compute(&[0, 0, 1, 1], &[0, 1, 1, 1], 2).unwrap();
        assert_eq!(m.accuracy, 0.75);
        assert_eq!(m.precision, vec![1.0, 2.0 / 3.0]);
        assert_eq!(m.recall, vec![0.5, 1.0]);
        assert_eq!(m.f1, vec![2.0 / 3.0, 4.0 / 5.0]);
        assert_eq!(m.macro_f1, 11.0 / 15.0);
        assert_eq!(m.confusion, vec![vec![1, 1], vec![0, 2]]);
    }

    #[test]
    fn perfect_and_absent_classes() {
        let m = Metrics::compute(&[0, 1, 1], &[0, 1, 1], 3).unwrap();
        assert_eq!(m.accuracy, 1.0);
        assert_eq!(m.f1, vec![1.0, 1.0, 0.0]);
        assert_eq!(m.macro_f1, 2.0 / 3.0);
        assert!(Metrics::compute(&[0], &[3], 3).is_err());
    }

    #[test]
    fn exact_rational_mean() {
        assert_eq!(mean_of_ratios(&[(2, 3), (4, 5)]), Some(11.0 / 15.0));
        assert_eq!(mean_of_ratios(&[(0, 0), (1, 1)]), Some(0.5));
        assert_eq!(mean_of_ratios(&[(1, 1 << 60)]), None);
    }

    #[test]
    fn confusion_csv_layout() {
        let m = Metrics::compute(&[0, 1], &[1, 1], 2).unwrap();
        let csv = m.confusion_csv(&["a".into(), "b, c".into()]);
        assert_eq!(csv, "truth\\predicted,a,\"b, c\"\na,0,1\n\"b, c\",0,1\n");
    }
}
