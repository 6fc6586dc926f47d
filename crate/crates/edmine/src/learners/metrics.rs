//! Confusion counts, per-fold metric values, and aggregated reports.
//!
//! All metric values are percentages in [0, 100]. Reports carry both the
//! standard deviation and the standard error across folds, plus the
//! averaging mode and balancing protocol for provenance.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{EdmError, Result};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Confusion {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl Confusion {
    pub fn from_pairs(truth: &[u8], predicted: &[u8]) -> Self {
        let mut c = Confusion::default();
        for (&t, &p) in truth.iter().zip(predicted) {
            match (t, p) {
                (1, 1) => c.tp += 1,
                (0, 1) => c.fp += 1,
                (0, 0) => c.tn += 1,
                (1, 0) => c.fn_ += 1,
                _ => {}
            }
        }
        c
    }

    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }

    pub fn add(&mut self, other: &Confusion) {
        self.tp += other.tp;
        self.fp += other.fp;
        self.tn += other.tn;
        self.fn_ += other.fn_;
    }
}

/// How per-class precision/recall/F combine.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Averaging {
    Macro,
    Weighted,
}

impl Averaging {
    pub fn as_str(&self) -> &'static str {
        match self {
            Averaging::Macro => "macro",
            Averaging::Weighted => "weighted",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "macro" => Some(Averaging::Macro),
            "weighted" => Some(Averaging::Weighted),
            _ => None,
        }
    }
}

/// One set of metric percentages.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsValues {
    pub accuracy: f64,
    pub precision: f64,
    pub recall: f64,
    pub f_score: f64,
}

impl MetricsValues {
    fn map2(a: &Self, b: &Self, f: impl Fn(f64, f64) -> f64) -> Self {
        MetricsValues {
            accuracy: f(a.accuracy, b.accuracy),
            precision: f(a.precision, b.precision),
            recall: f(a.recall, b.recall),
            f_score: f(a.f_score, b.f_score),
        }
    }

    fn scale(&self, s: f64) -> Self {
        Self::map2(self, self, |a, _| a * s)
    }
}

impl fmt::Display for MetricsValues {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "acc {:.2} prec {:.2} rec {:.2} f {:.2}",
            self.accuracy, self.precision, self.recall, self.f_score
        )
    }
}

/// Compute accuracy/precision/recall/F from a confusion table.
///
/// Per-class values combine under the chosen averaging mode; a class with no
/// predicted positives (or no support) contributes zero and is flagged in
/// the returned notes.
pub fn compute_metrics(c: &Confusion, averaging: Averaging) -> Result<(MetricsValues, Vec<String>)> {
    let n = c.total();
    if n == 0 {
        return Err(EdmError::Model("empty confusion table".into()));
    }
    let mut flags = Vec::new();
    let n = n as f64;
    let accuracy = (c.tp + c.tn) as f64 / n;

    // class 1 (pass), then class 0 (fail)
    let support = [(c.tp + c.fn_) as f64, (c.tn + c.fp) as f64];
    let predicted = [(c.tp + c.fp) as f64, (c.tn + c.fn_) as f64];
    let hits = [c.tp as f64, c.tn as f64];

    let mut precision = [0.0f64; 2];
    let mut recall = [0.0f64; 2];
    let mut f_score = [0.0f64; 2];
    for cls in 0..2 {
        if predicted[cls] > 0.0 {
            precision[cls] = hits[cls] / predicted[cls];
        } else {
            flags.push(format!(
                "class {} precision undefined (no predicted members), counted as 0",
                1 - cls
            ));
        }
        if support[cls] > 0.0 {
            recall[cls] = hits[cls] / support[cls];
        } else {
            flags.push(format!(
                "class {} recall undefined (no support), counted as 0",
                1 - cls
            ));
        }
        if precision[cls] + recall[cls] > 0.0 {
            f_score[cls] =
                2.0 * precision[cls] * recall[cls] / (precision[cls] + recall[cls]);
        }
    }

    let combine = |vals: [f64; 2]| -> f64 {
        match averaging {
            Averaging::Macro => (vals[0] + vals[1]) / 2.0,
            Averaging::Weighted => (vals[0] * support[0] + vals[1] * support[1]) / n,
        }
    };

    Ok((
        MetricsValues {
            accuracy: accuracy * 100.0,
            precision: combine(precision) * 100.0,
            recall: combine(recall) * 100.0,
            f_score: combine(f_score) * 100.0,
        },
        flags,
    ))
}

/// Per-fold and aggregate metrics for one evaluation, keyed by experiment
/// cell upstream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub folds: Vec<MetricsValues>,
    pub mean: MetricsValues,
    /// Sample standard deviation across folds.
    pub std_dev: MetricsValues,
    /// `std_dev / sqrt(k)`.
    pub std_err: MetricsValues,
    pub averaging: Averaging,
    pub confusion_total: Confusion,
    /// Balancing technique/scope strings, recorded for provenance.
    pub balance: String,
    pub flags: Vec<String>,
}

impl MetricsReport {
    pub fn from_folds(
        folds: Vec<MetricsValues>,
        averaging: Averaging,
        confusion_total: Confusion,
        balance: String,
        flags: Vec<String>,
    ) -> Self {
        let k = folds.len().max(1) as f64;
        let sum = folds
            .iter()
            .fold(MetricsValues::default(), |acc, v| {
                MetricsValues::map2(&acc, v, |a, b| a + b)
            });
        let mean = sum.scale(1.0 / k);
        let std_dev = if folds.len() > 1 {
            let var = folds.iter().fold(MetricsValues::default(), |acc, v| {
                MetricsValues::map2(&acc, &MetricsValues::map2(v, &mean, |a, b| {
                    (a - b) * (a - b)
                }), |a, b| a + b)
            });
            var.scale(1.0 / (k - 1.0))
        } else {
            MetricsValues::default()
        };
        let std_dev = MetricsValues {
            accuracy: std_dev.accuracy.sqrt(),
            precision: std_dev.precision.sqrt(),
            recall: std_dev.recall.sqrt(),
            f_score: std_dev.f_score.sqrt(),
        };
        let std_err = std_dev.scale(1.0 / k.sqrt());
        MetricsReport {
            folds,
            mean,
            std_dev,
            std_err,
            averaging,
            confusion_total,
            balance,
            flags,
        }
    }

    /// CSV rendering: one row per fold plus an aggregate block.
    pub fn to_csv_string(&self) -> String {
        let mut out = String::new();
        out.push_str("row,accuracy,precision,recall,f_score\n");
        for (i, f) in self.folds.iter().enumerate() {
            out.push_str(&format!(
                "fold{},{},{},{},{}\n",
                i, f.accuracy, f.precision, f.recall, f.f_score
            ));
        }
        for (name, v) in [
            ("mean", &self.mean),
            ("std_dev", &self.std_dev),
            ("std_err", &self.std_err),
        ] {
            out.push_str(&format!(
                "{},{},{},{},{}\n",
                name, v.accuracy, v.precision, v.recall, v.f_score
            ));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions_score_hundred() {
        let c = Confusion::from_pairs(&[1, 0, 1, 0], &[1, 0, 1, 0]);
        let (m, flags) = compute_metrics(&c, Averaging::Macro).unwrap();
        assert_eq!(m.accuracy, 100.0);
        assert_eq!(m.precision, 100.0);
        assert_eq!(m.recall, 100.0);
        assert_eq!(m.f_score, 100.0);
        assert!(flags.is_empty());
    }

    #[test]
    fn all_wrong_accuracy_is_zero() {
        let c = Confusion::from_pairs(&[1, 0], &[0, 1]);
        let (m, _) = compute_metrics(&c, Averaging::Macro).unwrap();
        assert_eq!(m.accuracy, 0.0);
    }

    #[test]
    fn hand_computed_macro_fixture() {
        // TP=3, FP=1, TN=4, FN=2: accuracy 70.00, macro precision
        // ((3/4)+(4/6))/2 = 70.83..
        let c = Confusion {
            tp: 3,
            fp: 1,
            tn: 4,
            fn_: 2,
        };
        let (m, _) = compute_metrics(&c, Averaging::Macro).unwrap();
        assert!((m.accuracy - 70.0).abs() < 1e-9);
        assert!((m.precision - (0.75 + 4.0 / 6.0) / 2.0 * 100.0).abs() < 1e-9);
        assert!((m.recall - (3.0 / 5.0 + 4.0 / 5.0) / 2.0 * 100.0).abs() < 1e-9);
    }

    #[test]
    fn weighted_recall_equals_accuracy() {
        let c = Confusion {
            tp: 30,
            fp: 7,
            tn: 12,
            fn_: 4,
        };
        let (m, _) = compute_metrics(&c, Averaging::Weighted).unwrap();
        assert!((m.recall - m.accuracy).abs() < 1e-9);
    }

    #[test]
    fn zero_predicted_positives_flagged_and_zeroed() {
        let c = Confusion::from_pairs(&[1, 1, 0], &[0, 0, 0]);
        let (m, flags) = compute_metrics(&c, Averaging::Macro).unwrap();
        assert!(!flags.is_empty());
        // class 1 precision counted as 0; class 0 precision = 1/3
        assert!((m.precision - (0.0 + 1.0 / 3.0) / 2.0 * 100.0).abs() < 1e-9);
    }

    #[test]
    fn report_mean_is_mean_of_folds() {
        let folds = vec![
            MetricsValues {
                accuracy: 50.0,
                precision: 40.0,
                recall: 60.0,
                f_score: 48.0,
            },
            MetricsValues {
                accuracy: 70.0,
                precision: 80.0,
                recall: 60.0,
                f_score: 68.0,
            },
        ];
        let report = MetricsReport::from_folds(
            folds,
            Averaging::Macro,
            Confusion::default(),
            "none".into(),
            vec![],
        );
        assert!((report.mean.accuracy - 60.0).abs() < 1e-12);
        assert!((report.mean.precision - 60.0).abs() < 1e-12);
        // sample std of {50, 70} = sqrt(200) ≈ 14.142
        assert!((report.std_dev.accuracy - 200f64.sqrt()).abs() < 1e-9);
    }
}
