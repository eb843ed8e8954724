//! Stratified k-fold assignment and cross-validation summaries.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use super::EvalError;

/// Partitions `0..labels.len()` into `k` folds, shuffling within each class
/// and dealing members round-robin so every fold keeps the class balance to
/// within one report. Deterministic in `seed`. Classes absent from `labels`
/// are ignored; every present class must have at least `k` members.
pub fn stratified_folds(
    labels: &[usize],
    k: usize,
    seed: u64,
) -> Result<Vec<Vec<usize>>, EvalError> {
    if k < 2 {
        return Err(EvalError::InvalidParam(format!("need at least 2 folds, got {k}")));
    }
    if labels.is_empty() {
        return Err(EvalError::Empty);
    }
    let n_classes = labels.iter().max().expect("non-empty") + 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut folds: Vec<Vec<usize>> = vec![Vec::new(); k];
    for class in 0..n_classes {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == class).collect();
        if members.is_empty() {
            continue;
        }
        if members.len() < k {
            return Err(EvalError::TooManyFolds {
                k,
                smallest: members.len(),
            });
        }
        members.shuffle(&mut rng);
        for (i, doc) in members.into_iter().enumerate() {
            folds[i % k].push(doc);
        }
    }
    for fold in &mut folds {
        fold.sort_unstable();
    }
    Ok(folds)
}

/// Precision and recall measured on one held-out fold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct FoldMetrics {
    pub fold: usize,
    pub precision: f64,
    pub recall: f64,
}

/// Mean and spread of one metric across folds. `half_width_std` is the
/// dispersion band `1.96 * std` used in the reported `mean ± ...` intervals;
/// `half_width_stderr` is the standard-error version `1.96 * std / sqrt(k)`.
/// Raw values are kept even when `mean ± half_width` leaves [0, 1]; clip at
/// display time if needed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricSummary {
    pub mean: f64,
    pub std: f64,
    pub half_width_std: f64,
    pub half_width_stderr: f64,
}

impl MetricSummary {
    /// Summarizes fold values with the sample standard deviation
    /// (k - 1 denominator).
    pub fn from_values(values: &[f64]) -> MetricSummary {
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / (k - 1.0);
        let std = var.sqrt();
        MetricSummary {
            mean,
            std,
            half_width_std: 1.96 * std,
            half_width_stderr: 1.96 * std / k.sqrt(),
        }
    }

    /// Formats the dispersion interval as e.g. `0.96 ± 0.14`.
    pub fn display_interval(&self) -> String {
        format!("{:.2} \u{b1} {:.2}", self.mean, self.half_width_std)
    }
}

/// Cross-validation outcome: per-fold metrics plus their summaries.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CvReport {
    pub k: usize,
    pub folds: Vec<FoldMetrics>,
    pub precision: MetricSummary,
    pub recall: MetricSummary,
}

impl CvReport {
    /// Requires at least two folds; the summaries need a spread.
    pub fn from_folds(folds: Vec<FoldMetrics>) -> Result<CvReport, EvalError> {
        if folds.len() < 2 {
            return Err(EvalError::InvalidParam(format!(
                "cross-validation needs at least 2 folds, got {}",
                folds.len()
            )));
        }
        let precisions: Vec<f64> = folds.iter().map(|f| f.precision).collect();
        let recalls: Vec<f64> = folds.iter().map(|f| f.recall).collect();
        Ok(CvReport {
            k: folds.len(),
            precision: MetricSummary::from_values(&precisions),
            recall: MetricSummary::from_values(&recalls),
            folds,
        })
    }
}
