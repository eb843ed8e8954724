//! Evaluation: confusion matrices, precision/recall/F1 with micro and macro
//! averaging, ROC curves and AUC, k-fold cross-validation summaries, and
//! Welch's t-test.

mod cv;
mod roc;
mod special;
mod ttest;

pub use cv::{stratified_folds, CvReport, FoldMetrics, MetricSummary};
pub use roc::{multiclass_roc, roc_auc, MulticlassRoc, RocCurve};
pub use ttest::{welch_ttest, TTestResult};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum EvalError {
    #[error("label `{0}` is not in the class list")]
    UnknownLabel(String),
    #[error("length mismatch: {left} truth values vs {right} predictions")]
    LengthMismatch { left: usize, right: usize },
    #[error("no observations")]
    Empty,
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("need both positive and negative observations, got one class only")]
    OneClassOnly,
    #[error("fold count {k} exceeds the smallest class size {smallest}")]
    TooManyFolds { k: usize, smallest: usize },
}

/// Counts of (true class, predicted class) pairs; rows are truth, columns
/// predictions.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ConfusionMatrix {
    classes: Vec<String>,
    counts: Vec<Vec<u64>>,
}

impl ConfusionMatrix {
    /// Tallies string labels against a class list, rejecting labels outside
    /// it.
    pub fn from_labels<S: AsRef<str>>(
        truth: &[S],
        predictions: &[S],
        classes: &[String],
    ) -> Result<ConfusionMatrix, EvalError> {
        let resolve = |label: &S| {
            classes
                .iter()
                .position(|c| c == label.as_ref())
                .ok_or_else(|| EvalError::UnknownLabel(label.as_ref().to_string()))
        };
        let truth_ix: Vec<usize> = truth.iter().map(resolve).collect::<Result<_, _>>()?;
        let pred_ix: Vec<usize> = predictions.iter().map(resolve).collect::<Result<_, _>>()?;
        ConfusionMatrix::from_indices(&truth_ix, &pred_ix, classes.to_vec())
    }

    /// Tallies pre-resolved class indices.
    pub fn from_indices(
        truth: &[usize],
        predictions: &[usize],
        classes: Vec<String>,
    ) -> Result<ConfusionMatrix, EvalError> {
        if truth.len() != predictions.len() {
            return Err(EvalError::LengthMismatch {
                left: truth.len(),
                right: predictions.len(),
            });
        }
        if truth.is_empty() {
            return Err(EvalError::Empty);
        }
        let k = classes.len();
        let mut counts = vec![vec![0u64; k]; k];
        for (&t, &p) in truth.iter().zip(predictions) {
            if t >= k || p >= k {
                return Err(EvalError::UnknownLabel(format!("class index {}", t.max(p))));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { classes, counts })
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    /// Count of reports with true class `t` predicted as `p`.
    pub fn count(&self, t: usize, p: usize) -> u64 {
        self.counts[t][p]
    }

    pub fn counts(&self) -> &[Vec<u64>] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    /// Number of observations whose true class is `c`.
    pub fn support(&self, c: usize) -> u64 {
        self.counts[c].iter().sum()
    }

    fn predicted(&self, c: usize) -> u64 {
        self.counts.iter().map(|row| row[c]).sum()
    }

    pub fn accuracy(&self) -> f64 {
        let correct: u64 = (0..self.n_classes()).map(|c| self.counts[c][c]).sum();
        correct as f64 / self.total() as f64
    }
}

/// Precision, recall, and their harmonic mean. Undefined ratios (empty
/// denominators) are reported as 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

impl Prf {
    fn from_counts(tp: u64, fp: u64, fn_: u64) -> Prf {
        let ratio = |num: u64, den: u64| if den == 0 { 0.0 } else { num as f64 / den as f64 };
        let precision = ratio(tp, tp + fp);
        let recall = ratio(tp, tp + fn_);
        Prf {
            precision,
            recall,
            f1: f1_score(precision, recall),
        }
    }
}

/// Harmonic mean of precision and recall; 0 when both are 0.
pub fn f1_score(precision: f64, recall: f64) -> f64 {
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// One-vs-rest precision/recall/F1 for a single class of any confusion
/// matrix.
pub fn class_metrics(cm: &ConfusionMatrix, class: usize) -> Prf {
    let tp = cm.count(class, class);
    let fp = cm.predicted(class) - tp;
    let fn_ = cm.support(class) - tp;
    Prf::from_counts(tp, fp, fn_)
}

/// Metrics of a two-class matrix with respect to its positive class, which
/// by schema convention is listed first.
pub fn binary_metrics(cm: &ConfusionMatrix) -> Result<Prf, EvalError> {
    if cm.n_classes() != 2 {
        return Err(EvalError::InvalidParam(format!(
            "binary metrics need a 2-class matrix, got {} classes",
            cm.n_classes()
        )));
    }
    Ok(class_metrics(cm, 0))
}

/// Per-class metrics with support, plus accuracy.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassMetrics {
    pub class: String,
    pub support: u64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

/// Full evaluation report: one row per class plus pooled (micro) and
/// averaged (macro) aggregates.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub per_class: Vec<ClassMetrics>,
    pub accuracy: f64,
    pub micro: Prf,
    #[serde(rename = "macro")]
    pub macro_avg: Prf,
}

/// Computes per-class, micro, and macro metrics. Micro pools true/false
/// positives over all classes; for single-label classification this makes
/// micro precision, recall, and F1 all equal to accuracy. Macro averages the
/// per-class values unweighted, counting absent classes as zero.
pub fn micro_macro(cm: &ConfusionMatrix) -> MetricsReport {
    let k = cm.n_classes();
    let mut per_class = Vec::with_capacity(k);
    let (mut tp_sum, mut fp_sum, mut fn_sum) = (0u64, 0u64, 0u64);
    let (mut p_sum, mut r_sum, mut f_sum) = (0.0f64, 0.0f64, 0.0f64);
    for c in 0..k {
        let prf = class_metrics(cm, c);
        let tp = cm.count(c, c);
        tp_sum += tp;
        fp_sum += cm.predicted(c) - tp;
        fn_sum += cm.support(c) - tp;
        p_sum += prf.precision;
        r_sum += prf.recall;
        f_sum += prf.f1;
        per_class.push(ClassMetrics {
            class: cm.classes()[c].clone(),
            support: cm.support(c),
            precision: prf.precision,
            recall: prf.recall,
            f1: prf.f1,
        });
    }
    MetricsReport {
        per_class,
        accuracy: cm.accuracy(),
        micro: Prf::from_counts(tp_sum, fp_sum, fn_sum),
        macro_avg: Prf {
            precision: p_sum / k as f64,
            recall: r_sum / k as f64,
            f1: f_sum / k as f64,
        },
    }
}
