use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub class: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub macro_f1: f64,
    pub per_class: Vec<ClassMetrics>,
    /// Rows are true classes, columns predicted classes.
    pub confusion: Vec<Vec<usize>>,
    pub epoch: Option<usize>,
    pub seed: u64,
}

pub fn confusion_matrix(truth: &[usize], predicted: &[usize], n_classes: usize) -> Vec<Vec<usize>> {
    let mut m = vec![vec![0; n_classes]; n_classes];
    for (&t, &p) in truth.iter().zip(predicted) {
        m[t][p] += 1;
    }
    m
}

/// Accuracy, per-class precision/recall/F1 and their unweighted mean over
/// every class. Undefined ratios count as 0.
pub fn metrics_from_confusion(confusion: &[Vec<usize>], class_names: &[String]) -> (f64, f64, Vec<ClassMetrics>) {
    let c = confusion.len();
    let total: usize = confusion.iter().flatten().sum();
    let correct: usize = (0..c).map(|k| confusion[k][k]).sum();
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let per_class: Vec<ClassMetrics> = (0..c)
        .map(|k| {
            let tp = confusion[k][k];
            let support: usize = confusion[k].iter().sum();
            let predicted: usize = confusion.iter().map(|row| row[k]).sum();
            let precision = ratio(tp, predicted);
            let recall = ratio(tp, support);
            let f1 = if precision + recall == 0.0 {
                0.0
            } else {
                2.0 * precision * recall / (precision + recall)
            };
            ClassMetrics {
                class: class_names.get(k).cloned().unwrap_or_else(|| k.to_string()),
                precision,
                recall,
                f1,
                support,
            }
        })
        .collect();
    let macro_f1 = if c == 0 {
        0.0
    } else {
        per_class.iter().map(|m| m.f1).sum::<f64>() / c as f64
    };
    (ratio(correct, total), macro_f1, per_class)
}

impl MetricsReport {
    pub fn from_predictions(
        truth: &[usize],
        predicted: &[usize],
        class_names: &[String],
        epoch: Option<usize>,
        seed: u64,
    ) -> Self {
        let confusion = confusion_matrix(truth, predicted, class_names.len());
        let (accuracy, macro_f1, per_class) = metrics_from_confusion(&confusion, class_names);
        Self {
            accuracy,
            macro_f1,
            per_class,
            confusion,
            epoch,
            seed,
        }
    }
}
