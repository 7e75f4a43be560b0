//! Accuracy metric, confusion matrices and evaluation reports.

use std::fmt::Write as _;

use crate::types::GestureLabel;
use crate::{Error, Result};

/// Percentage of predictions equal to the truth.
pub fn accuracy_percent(predictions: &[GestureLabel], truth: &[GestureLabel]) -> Result<f64> {
    if predictions.len() != truth.len() || truth.is_empty() {
        return Err(Error::Data(format!(
            "accuracy needs matching non-empty slices, got {} vs {}",
            predictions.len(),
            truth.len()
        )));
    }
    let correct = predictions
        .iter()
        .zip(truth)
        .filter(|(p, t)| p == t)
        .count();
    Ok(100.0 * correct as f64 / truth.len() as f64)
}

/// 4x4 confusion counts over Swipe, Push, Pull, Noise; rows are truth,
/// columns are predictions.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: [[u64; 4]; 4],
}

fn label_slot(label: GestureLabel) -> usize {
    label.class_index().unwrap_or(3)
}

impl ConfusionMatrix {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, truth: GestureLabel, predicted: GestureLabel) {
        self.counts[label_slot(truth)][label_slot(predicted)] += 1;
    }

    pub fn count(&self, truth: GestureLabel, predicted: GestureLabel) -> u64 {
        self.counts[label_slot(truth)][label_slot(predicted)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn diagonal_sum(&self) -> u64 {
        (0..4).map(|k| self.counts[k][k]).sum()
    }

    /// Per-truth-class totals, in label order.
    pub fn row_sums(&self) -> [u64; 4] {
        let mut sums = [0u64; 4];
        for (row, sum) in self.counts.iter().zip(sums.iter_mut()) {
            *sum = row.iter().sum();
        }
        sums
    }

    /// Overall accuracy implied by the matrix, percent.
    pub fn accuracy_percent(&self) -> f64 {
        let total = self.total();
        if total == 0 {
            return 0.0;
        }
        100.0 * self.diagonal_sum() as f64 / total as f64
    }

    /// CSV with a header row and a leading truth-label column.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("truth\\pred");
        for label in GestureLabel::ALL {
            let _ = write!(out, ",{label}");
        }
        out.push('\n');
        for (row_label, row) in GestureLabel::ALL.iter().zip(&self.counts) {
            let _ = write!(out, "{row_label}");
            for v in row {
                let _ = write!(out, ",{v}");
            }
            out.push('\n');
        }
        out
    }
}

/// Mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let mean = values.iter().sum::<f64>() / values.len() as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / values.len() as f64;
    (mean, var.sqrt())
}

/// Result of a repeated-split evaluation.
#[derive(Debug, Clone)]
pub struct EvalReport {
    pub split_accuracies: Vec<f64>,
    pub mean_accuracy: f64,
    pub std_accuracy: f64,
    /// Confusion counts aggregated across all splits.
    pub confusion: ConfusionMatrix,
    /// Mean wall-clock training time per split (seconds).
    pub train_seconds: f64,
    /// Mean wall-clock prediction latency per test sample (milliseconds).
    pub predict_ms_per_sample: f64,
}

impl EvalReport {
    pub fn from_splits(
        split_accuracies: Vec<f64>,
        confusion: ConfusionMatrix,
        train_seconds: f64,
        predict_ms_per_sample: f64,
    ) -> Self {
        let (mean_accuracy, std_accuracy) = mean_std(&split_accuracies);
        Self {
            split_accuracies,
            mean_accuracy,
            std_accuracy,
            confusion,
            train_seconds,
            predict_ms_per_sample,
        }
    }

    /// Deterministic CSV: one row per split plus the mean/std summary rows.
    pub fn accuracies_csv(&self) -> String {
        let mut out = String::from("split,accuracy_percent\n");
        for (k, acc) in self.split_accuracies.iter().enumerate() {
            let _ = writeln!(out, "{k},{acc:.4}");
        }
        let _ = writeln!(out, "mean,{:.4}", self.mean_accuracy);
        let _ = writeln!(out, "std,{:.4}", self.std_accuracy);
        out
    }

    /// Human-readable summary. Contains wall-clock timings, so it is not a
    /// reproducible primary output.
    pub fn summary_text(&self, name: &str) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{name} evaluation over {} splits", self.split_accuracies.len());
        let _ = writeln!(
            out,
            "accuracy: {:.2}% (+/-{:.2})",
            self.mean_accuracy, self.std_accuracy
        );
        let _ = writeln!(out, "train time per split: {:.2} s", self.train_seconds);
        let _ = writeln!(
            out,
            "prediction latency per sample: {:.3} ms",
            self.predict_ms_per_sample
        );
        let _ = writeln!(out, "confusion (rows = truth):");
        out.push_str(&self.confusion.to_csv());
        out
    }
}

/// Prediction rows in the `time_s,label` stream format.
pub fn predictions_csv(decisions: &[(f64, GestureLabel)]) -> String {
    let mut out = String::from("time_s,label\n");
    for (t, label) in decisions {
        let _ = writeln!(out, "{t:.3},{label}");
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use GestureLabel::*;

    #[test]
    fn accuracy_basics() {
        let truth = vec![Swipe, Push, Pull];
        assert_eq!(accuracy_percent(&truth, &truth).unwrap(), 100.0);
        let all_swipe = vec![Swipe, Swipe, Swipe];
        let acc = accuracy_percent(&all_swipe, &truth).unwrap();
        assert!((acc - 100.0 / 3.0).abs() < 1e-9);
        assert!(accuracy_percent(&[], &[]).is_err());
    }

    #[test]
    fn confusion_rows_sum_to_class_counts() {
        let mut m = ConfusionMatrix::new();
        m.record(Swipe, Swipe);
        m.record(Swipe, Push);
        m.record(Push, Push);
        m.record(Noise, Noise);
        m.record(Noise, Pull);
        assert_eq!(m.row_sums(), [2, 1, 0, 2]);
        assert_eq!(m.total(), 5);
        assert_eq!(m.diagonal_sum(), 3);
        assert!((m.accuracy_percent() - 60.0).abs() < 1e-9);
    }

    #[test]
    fn confusion_csv_shape() {
        let mut m = ConfusionMatrix::new();
        m.record(Pull, Pull);
        let csv = m.to_csv();
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 5);
        assert_eq!(lines[0], "truth\\pred,Swipe,Push,Pull,Noise");
        assert_eq!(lines[3], "Pull,0,0,1,0");
    }

    #[test]
    fn report_mean_matches_confusion_diagonal() {
        let mut m = ConfusionMatrix::new();
        for _ in 0..9 {
            m.record(Swipe, Swipe);
        }
        m.record(Swipe, Push);
        let report = EvalReport::from_splits(vec![90.0], m, 1.0, 0.5);
        assert!((report.mean_accuracy - report.confusion.accuracy_percent()).abs() < 1e-9);
    }

    #[test]
    fn mean_std_simple() {
        let (mean, std) = mean_std(&[2.0, 4.0]);
        assert_eq!(mean, 3.0);
        assert_eq!(std, 1.0);
    }
}
