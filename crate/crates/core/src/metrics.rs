//! Confusion matrices and precision/recall/F1 classification reports.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("{true_len} true labels but {pred_len} predictions")]
    LengthMismatch { true_len: usize, pred_len: usize },
    #[error("label {value} at index {index} is outside [0, {classes})")]
    OutOfRange { index: usize, value: usize, classes: usize },
    #[error("confusion matrix is empty")]
    Empty,
    #[error("{labels} class labels for a {classes}-class matrix")]
    LabelCount { labels: usize, classes: usize },
}

/// Rows are true classes, columns predicted classes.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub class_labels: Vec<String>,
    pub counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn from_counts(class_labels: Vec<String>, counts: Vec<Vec<u64>>) -> Result<Self, MetricsError> {
        let k = counts.len();
        if class_labels.len() != k {
            return Err(MetricsError::LabelCount { labels: class_labels.len(), classes: k });
        }
        if let Some(row) = counts.iter().find(|r| r.len() != k) {
            return Err(MetricsError::LabelCount { labels: row.len(), classes: k });
        }
        Ok(Self { class_labels, counts })
    }

    pub fn num_classes(&self) -> usize {
        self.counts.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.num_classes()).map(|i| self.counts[i][i]).sum()
    }

    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }

    /// Reorders classes: new class `i` is old class `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Self {
        Self {
            class_labels: order.iter().map(|&i| self.class_labels[i].clone()).collect(),
            counts: order.iter().map(|&r| order.iter().map(|&c| self.counts[r][c]).collect()).collect(),
        }
    }
}

/// Counts `(true, predicted)` pairs over `k` classes.
pub fn confusion(
    true_labels: &[usize],
    predicted: &[usize],
    class_labels: &[String],
) -> Result<ConfusionMatrix, MetricsError> {
    if true_labels.len() != predicted.len() {
        return Err(MetricsError::LengthMismatch { true_len: true_labels.len(), pred_len: predicted.len() });
    }
    let k = class_labels.len();
    let mut counts = vec![vec![0u64; k]; k];
    for (index, (&t, &p)) in true_labels.iter().zip(predicted).enumerate() {
        for value in [t, p] {
            if value >= k {
                return Err(MetricsError::OutOfRange { index, value, classes: k });
            }
        }
        counts[t][p] += 1;
    }
    Ok(ConfusionMatrix { class_labels: class_labels.to_vec(), counts })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassReport {
    pub class: String,
    #[serde(flatten)]
    pub scores: ClassScores,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationReport {
    pub per_class: Vec<ClassReport>,
    pub accuracy: f64,
    pub macro_avg: ClassScores,
    pub weighted_avg: ClassScores,
    /// Classes whose precision or recall had a zero denominator (reported as 0).
    pub undefined: Vec<String>,
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den > 0).then(|| num as f64 / den as f64)
}

fn harmonic(p: f64, r: f64) -> f64 {
    if p + r > 0.0 {
        2.0 * p * r / (p + r)
    } else {
        0.0
    }
}

pub fn report(cm: &ConfusionMatrix) -> Result<ClassificationReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::Empty);
    }
    let k = cm.num_classes();
    let mut per_class = Vec::with_capacity(k);
    let mut undefined = Vec::new();
    for i in 0..k {
        let tp = cm.counts[i][i];
        let support = cm.support(i);
        let precision = ratio(tp, cm.predicted(i));
        let recall = ratio(tp, support);
        if precision.is_none() || recall.is_none() {
            undefined.push(cm.class_labels[i].clone());
        }
        let (precision, recall) = (precision.unwrap_or(0.0), recall.unwrap_or(0.0));
        per_class.push(ClassReport {
            class: cm.class_labels[i].clone(),
            scores: ClassScores { precision, recall, f1: harmonic(precision, recall), support },
        });
    }
    let mean = |f: fn(&ClassScores) -> f64| per_class.iter().map(|c| f(&c.scores)).sum::<f64>() / k as f64;
    let weighted = |f: fn(&ClassScores) -> f64| {
        per_class.iter().map(|c| f(&c.scores) * c.scores.support as f64).sum::<f64>() / total as f64
    };
    let macro_avg = ClassScores {
        precision: mean(|s| s.precision),
        recall: mean(|s| s.recall),
        f1: mean(|s| s.f1),
        support: total,
    };
    let weighted_avg = ClassScores {
        precision: weighted(|s| s.precision),
        recall: weighted(|s| s.recall),
        f1: weighted(|s| s.f1),
        support: total,
    };
    Ok(ClassificationReport {
        per_class,
        accuracy: cm.trace() as f64 / total as f64,
        macro_avg,
        weighted_avg,
        undefined,
    })
}

impl ClassificationReport {
    /// Plain-text table with two-decimal rates.
    pub fn to_table(&self) -> String {
        let width = self.per_class.iter().map(|c| c.class.len()).chain(["weighted avg".len()]).max().unwrap_or(0);
        let row = |name: &str, s: &ClassScores| {
            format!("{name:>width$}  {:>9.2}  {:>9.2}  {:>9.2}  {:>9}\n", s.precision, s.recall, s.f1, s.support)
        };
        let mut out =
            format!("{:>width$}  {:>9}  {:>9}  {:>9}  {:>9}\n\n", "", "precision", "recall", "f1-score", "support");
        for c in &self.per_class {
            out.push_str(&row(&c.class, &c.scores));
        }
        out.push('\n');
        out.push_str(&format!(
            "{:>width$}  {:>9}  {:>9}  {:>9.2}  {:>9}\n",
            "accuracy", "", "", self.accuracy, self.macro_avg.support
        ));
        out.push_str(&row("macro avg", &self.macro_avg));
        out.push_str(&row("weighted avg", &self.weighted_avg));
        out
    }
}
