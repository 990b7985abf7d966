//! Confusion matrices, classification metrics and training-history export.

mod history;

use serde::{Deserialize, Serialize};

pub use history::{history_csv, history_deltas, history_report, HistoryDeltas};

#[derive(Debug, thiserror::Error)]
pub enum MetricsError {
    #[error("truth has {truth} entries but pred has {pred}")]
    LengthMismatch { truth: usize, pred: usize },
    #[error("{which}[{index}] = {code} is not below {classes}")]
    CodeOutOfRange {
        which: &'static str,
        index: usize,
        code: usize,
        classes: usize,
    },
    #[error("the confusion matrix is empty")]
    EmptyMatrix,
    #[error("the history is empty")]
    EmptyHistory,
    #[error("cannot write report: {0}")]
    Io(#[from] std::io::Error),
}

/// Counts indexed `[true class][predicted class]`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    pub fn zeros(classes: usize) -> Self {
        Self {
            counts: vec![vec![0; classes]; classes],
        }
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn get(&self, truth: usize, pred: usize) -> u64 {
        self.counts[truth][pred]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.classes()).map(|k| self.counts[k][k]).sum()
    }

    /// Row sum: how many samples truly belong to `class`.
    pub fn support(&self, class: usize) -> u64 {
        self.counts[class].iter().sum()
    }

    /// Column sum: how many samples were assigned to `class`.
    pub fn predicted(&self, class: usize) -> u64 {
        self.counts.iter().map(|row| row[class]).sum()
    }
}

pub fn confusion_matrix<T, P>(
    truth: &[T],
    pred: &[P],
    classes: usize,
) -> Result<ConfusionMatrix, MetricsError>
where
    T: Copy + Into<usize>,
    P: Copy + Into<usize>,
{
    if truth.len() != pred.len() {
        return Err(MetricsError::LengthMismatch {
            truth: truth.len(),
            pred: pred.len(),
        });
    }
    let check = |which, index, code: usize| {
        if code < classes {
            Ok(code)
        } else {
            Err(MetricsError::CodeOutOfRange {
                which,
                index,
                code,
                classes,
            })
        }
    };
    let mut cm = ConfusionMatrix::zeros(classes);
    for (i, (&t, &p)) in truth.iter().zip(pred).enumerate() {
        let t = check("truth", i, t.into())?;
        let p = check("pred", i, p.into())?;
        cm.counts[t][p] += 1;
    }
    Ok(cm)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: u64,
    pub predicted: u64,
    /// Set when nothing was predicted as this class, so precision was forced to 0.
    pub precision_undefined: bool,
    /// Set when the class never occurs in the truth, so recall was forced to 0.
    pub recall_undefined: bool,
    /// Set when precision and recall are both 0, so F1 was forced to 0.
    pub f1_undefined: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Average {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub total: u64,
    pub accuracy: f64,
    pub per_class: Vec<ClassMetrics>,
    pub macro_avg: Average,
    pub micro_avg: Average,
    pub weighted_avg: Average,
}

fn ratio(num: u64, den: u64) -> (f64, bool) {
    if den == 0 {
        (0.0, true)
    } else {
        (num as f64 / den as f64, false)
    }
}

fn harmonic(p: f64, r: f64) -> (f64, bool) {
    if p + r == 0.0 {
        (0.0, true)
    } else {
        (2.0 * p * r / (p + r), false)
    }
}

pub fn classification_metrics(cm: &ConfusionMatrix) -> Result<EvalReport, MetricsError> {
    let total = cm.total();
    if total == 0 {
        return Err(MetricsError::EmptyMatrix);
    }
    let k = cm.classes();
    let per_class: Vec<ClassMetrics> = (0..k)
        .map(|c| {
            let tp = cm.get(c, c);
            let support = cm.support(c);
            let predicted = cm.predicted(c);
            let (precision, precision_undefined) = ratio(tp, predicted);
            let (recall, recall_undefined) = ratio(tp, support);
            let (f1, f1_undefined) = harmonic(precision, recall);
            ClassMetrics {
                precision,
                recall,
                f1,
                support,
                predicted,
                precision_undefined,
                recall_undefined,
                f1_undefined,
            }
        })
        .collect();

    let mean = |f: fn(&ClassMetrics) -> f64| per_class.iter().map(f).sum::<f64>() / k as f64;
    let weighted = |f: fn(&ClassMetrics) -> f64| {
        per_class
            .iter()
            .map(|m| m.support as f64 * f(m))
            .sum::<f64>()
            / total as f64
    };
    let macro_avg = Average {
        precision: mean(|m| m.precision),
        recall: mean(|m| m.recall),
        f1: mean(|m| m.f1),
    };
    let weighted_avg = Average {
        precision: weighted(|m| m.precision),
        recall: weighted(|m| m.recall),
        f1: weighted(|m| m.f1),
    };

    // Pooled over classes, every miss is one false positive and one false negative.
    let tp = cm.trace();
    let misses = total - tp;
    let accuracy = tp as f64 / total as f64;
    let micro_avg = Average {
        precision: ratio(tp, tp + misses).0,
        recall: ratio(tp, tp + misses).0,
        f1: ratio(2 * tp, 2 * tp + 2 * misses).0,
    };

    Ok(EvalReport {
        confusion: cm.clone(),
        total,
        accuracy,
        per_class,
        macro_avg,
        micro_avg,
        weighted_avg,
    })
}

/// [`confusion_matrix`] followed by [`classification_metrics`].
pub fn evaluate_predictions<T, P>(
    truth: &[T],
    pred: &[P],
    classes: usize,
) -> Result<EvalReport, MetricsError>
where
    T: Copy + Into<usize>,
    P: Copy + Into<usize>,
{
    classification_metrics(&confusion_matrix(truth, pred, classes)?)
}

impl EvalReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report fields are always serializable")
    }
}
