//! Detection metrics, cross-validation, and distribution exports.

mod cdf;
mod kfold;

pub use cdf::{cdf_export, ClassCdf};
pub use kfold::kfold;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row = actual class, column = predicted class.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn new(labels: Vec<String>) -> ConfusionMatrix {
        let n = labels.len();
        ConfusionMatrix {
            labels,
            counts: vec![vec![0; n]; n],
        }
    }

    fn index(&self, label: &str) -> Result<usize> {
        self.labels
            .iter()
            .position(|l| l == label)
            .ok_or_else(|| Error::Data(format!("label {label:?} not in confusion matrix")))
    }

    pub fn record(&mut self, actual: &str, predicted: &str) -> Result<()> {
        let a = self.index(actual)?;
        let p = self.index(predicted)?;
        self.counts[a][p] += 1;
        Ok(())
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        assert_eq!(self.labels, other.labels, "label spaces must match");
        for (mine, theirs) in self.counts.iter_mut().zip(&other.counts) {
            for (m, t) in mine.iter_mut().zip(theirs) {
                *m += t;
            }
        }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Rows of `actual` class.
    pub fn support(&self, label: &str) -> Result<u64> {
        let a = self.index(label)?;
        Ok(self.counts[a].iter().sum())
    }

    /// One-vs-rest reduction: (TP, FN, FP, TN) treating `positive` as the
    /// positive class and everything else as negative.
    pub fn binary_counts(&self, positive: &str) -> Result<(u64, u64, u64, u64)> {
        let p = self.index(positive)?;
        let mut tp = 0;
        let mut fn_ = 0;
        let mut fp = 0;
        let mut tn = 0;
        for (a, row) in self.counts.iter().enumerate() {
            for (pr, &count) in row.iter().enumerate() {
                match (a == p, pr == p) {
                    (true, true) => tp += count,
                    (true, false) => fn_ += count,
                    (false, true) => fp += count,
                    (false, false) => tn += count,
                }
            }
        }
        Ok((tp, fn_, fp, tn))
    }

    pub fn accuracy(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        let diagonal: u64 = (0..self.labels.len()).map(|i| self.counts[i][i]).sum();
        diagonal as f64 / total as f64
    }
}

/// TP rate, FP rate, precision, and F-measure for one positive class.
/// A zero denominator reports the metric as 0 and names it in `degenerate`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub tp_rate: f64,
    pub fp_rate: f64,
    pub precision: f64,
    pub f_measure: f64,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub degenerate: Vec<String>,
}

pub fn metrics_from_counts(tp: u64, fn_: u64, fp: u64, tn: u64) -> Metrics {
    let mut degenerate = Vec::new();
    let mut ratio = |num: u64, den: u64, name: &str| -> f64 {
        if den == 0 {
            degenerate.push(name.to_string());
            0.0
        } else {
            num as f64 / den as f64
        }
    };
    let tp_rate = ratio(tp, tp + fn_, "tp_rate");
    let fp_rate = ratio(fp, fp + tn, "fp_rate");
    let precision = ratio(tp, tp + fp, "precision");
    let f_measure = ratio(2 * tp, 2 * tp + fp + fn_, "f_measure");
    Metrics {
        tp_rate,
        fp_rate,
        precision,
        f_measure,
        degenerate,
    }
}

/// One-vs-rest metrics for `positive` against all other classes.
pub fn metrics(cm: &ConfusionMatrix, positive: &str) -> Result<Metrics> {
    let (tp, fn_, fp, tn) = cm.binary_counts(positive)?;
    Ok(metrics_from_counts(tp, fn_, fp, tn))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub label: String,
    pub support: u64,
    pub metrics: Metrics,
}

/// The full evaluation summary: per-class one-vs-rest metrics plus both
/// aggregation conventions (support-weighted and macro), since either may
/// be wanted when comparing reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub per_class: Vec<ClassMetrics>,
    pub weighted: Metrics,
    pub macro_avg: Metrics,
    pub accuracy: f64,
    pub fold_count: Option<usize>,
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub feature_ranking: Vec<(String, f64)>,
}

impl EvalReport {
    pub fn from_confusion(cm: ConfusionMatrix) -> Result<EvalReport> {
        let mut per_class = Vec::with_capacity(cm.labels.len());
        for label in &cm.labels {
            per_class.push(ClassMetrics {
                label: label.clone(),
                support: cm.support(label)?,
                metrics: metrics(&cm, label)?,
            });
        }
        let total_support: u64 = per_class.iter().map(|c| c.support).sum();
        let average = |weigh: &dyn Fn(&ClassMetrics) -> f64| -> Metrics {
            let mut out = Metrics::default();
            let mut degenerate = std::collections::BTreeSet::new();
            for class in &per_class {
                let w = weigh(class);
                out.tp_rate += w * class.metrics.tp_rate;
                out.fp_rate += w * class.metrics.fp_rate;
                out.precision += w * class.metrics.precision;
                out.f_measure += w * class.metrics.f_measure;
                degenerate.extend(class.metrics.degenerate.iter().cloned());
            }
            out.degenerate = degenerate.into_iter().collect();
            out
        };
        let weighted = average(&|c: &ClassMetrics| {
            if total_support == 0 {
                0.0
            } else {
                c.support as f64 / total_support as f64
            }
        });
        let macro_avg = average(&|_| 1.0 / per_class.len().max(1) as f64);
        Ok(EvalReport {
            accuracy: cm.accuracy(),
            confusion: cm,
            per_class,
            weighted,
            macro_avg,
            fold_count: None,
            seed: None,
            feature_ranking: Vec::new(),
        })
    }

    /// Plain-text rendering for terminals and log files.
    pub fn render_text(&self) -> String {
        use std::fmt::Write;
        let mut out = String::new();
        let _ = writeln!(out, "accuracy: {:.4}", self.accuracy);
        if let Some(k) = self.fold_count {
            let _ = writeln!(out, "folds: {k}");
        }
        if let Some(seed) = self.seed {
            let _ = writeln!(out, "seed: {seed}");
        }
        let _ = writeln!(
            out,
            "{:<14} {:>8} {:>8} {:>9} {:>9} {:>8}",
            "class", "support", "tp-rate", "fp-rate", "precision", "f"
        );
        for class in &self.per_class {
            let m = &class.metrics;
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>8.4} {:>8.4} {:>9.4} {:>8.4}{}",
                class.label,
                class.support,
                m.tp_rate,
                m.fp_rate,
                m.precision,
                m.f_measure,
                if m.degenerate.is_empty() {
                    String::new()
                } else {
                    format!("  (degenerate: {})", m.degenerate.join(", "))
                }
            );
        }
        for (name, m) in [("weighted", &self.weighted), ("macro", &self.macro_avg)] {
            let _ = writeln!(
                out,
                "{:<14} {:>8} {:>8.4} {:>8.4} {:>9.4} {:>8.4}",
                name, "-", m.tp_rate, m.fp_rate, m.precision, m.f_measure
            );
        }
        if !self.feature_ranking.is_empty() {
            let _ = writeln!(out, "top features by information gain:");
            for (feature, gain) in &self.feature_ranking {
                let _ = writeln!(out, "  {gain:.6}  {feature}");
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn binary_cm(tp: u64, fn_: u64, fp: u64, tn: u64) -> ConfusionMatrix {
        let mut cm = ConfusionMatrix::new(vec!["pos".into(), "neg".into()]);
        cm.counts[0][0] = tp;
        cm.counts[0][1] = fn_;
        cm.counts[1][0] = fp;
        cm.counts[1][1] = tn;
        cm
    }

    #[test]
    fn detection_metrics_match_hand_arithmetic() {
        let m = metrics(&binary_cm(151, 9, 30, 130), "pos").unwrap();
        assert!((m.tp_rate - 151.0 / 160.0).abs() < 1e-12);
        assert!((m.precision - 151.0 / 181.0).abs() < 1e-12);
        assert!((m.f_measure - 302.0 / 341.0).abs() < 1e-12);
        assert!((m.fp_rate - 30.0 / 160.0).abs() < 1e-12);
        assert!(m.degenerate.is_empty());
    }

    #[test]
    fn perfect_classifier_scores_ones_and_zero_fpr() {
        let m = metrics(&binary_cm(10, 0, 0, 20), "pos").unwrap();
        assert_eq!(
            (m.tp_rate, m.fp_rate, m.precision, m.f_measure),
            (1.0, 0.0, 1.0, 1.0)
        );
    }

    #[test]
    fn zero_denominators_report_zero_and_flag() {
        // No actual positives and no predicted positives.
        let m = metrics(&binary_cm(0, 0, 0, 5), "pos").unwrap();
        assert_eq!(m.tp_rate, 0.0);
        assert_eq!(m.precision, 0.0);
        assert!(m.degenerate.contains(&"tp_rate".to_string()));
        assert!(m.degenerate.contains(&"precision".to_string()));
        assert!(m.degenerate.contains(&"f_measure".to_string()));
    }

    #[test]
    fn duplicating_all_counts_changes_no_rate() {
        let a = metrics(&binary_cm(151, 9, 30, 130), "pos").unwrap();
        let b = metrics(&binary_cm(302, 18, 60, 260), "pos").unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn f_measure_is_harmonic_mean_of_precision_and_tpr() {
        let m = metrics(&binary_cm(151, 9, 30, 130), "pos").unwrap();
        let harmonic = 2.0 * m.precision * m.tp_rate / (m.precision + m.tp_rate);
        assert!((m.f_measure - harmonic).abs() <= 1e-12);
    }

    #[test]
    fn accuracy_counts_the_diagonal() {
        let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into(), "c".into()]);
        cm.counts[0][0] = 506;
        cm.counts[1][1] = 460;
        cm.counts[0][1] = 7;
        cm.counts[1][0] = 29;
        assert!((cm.accuracy() - 966.0 / 1002.0).abs() < 1e-12);
    }

    #[test]
    fn multiclass_report_aggregates_both_ways() {
        let mut cm = ConfusionMatrix::new(vec!["a".into(), "b".into()]);
        cm.counts[0][0] = 8;
        cm.counts[0][1] = 2;
        cm.counts[1][1] = 30;
        let report = EvalReport::from_confusion(cm).unwrap();
        // Class a: TPR 0.8; class b: TPR 1.0. Weighted: (10*0.8 + 30*1.0)/40.
        assert!((report.weighted.tp_rate - 0.95).abs() < 1e-12);
        assert!((report.macro_avg.tp_rate - 0.9).abs() < 1e-12);
        assert!((report.accuracy - 38.0 / 40.0).abs() < 1e-12);
        let text = report.render_text();
        assert!(text.contains("weighted"));
        assert!(text.contains("macro"));
    }
}
