//! ROC curves and AUC, for binary scores and micro/macro multiclass
//! aggregates.

use serde::Serialize;

use super::EvalError;

/// An ROC curve as (false positive rate, true positive rate) points from
/// (0, 0) to (1, 1), with its trapezoidal area.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RocCurve {
    pub points: Vec<(f64, f64)>,
    pub auc: f64,
}

/// Sweeps every distinct score as a threshold, highest first. Tied scores
/// collapse into a single curve point, which makes the trapezoidal area equal
/// to the rank-sum (pair-counting) AUC. Needs at least one positive and one
/// negative observation.
pub fn roc_auc(scores: &[f64], truth: &[bool]) -> Result<RocCurve, EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: truth.len(),
            right: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(EvalError::InvalidParam("scores must not be NaN".into()));
    }
    let positives = truth.iter().filter(|&&t| t).count() as f64;
    let negatives = truth.len() as f64 - positives;
    if positives == 0.0 || negatives == 0.0 {
        return Err(EvalError::OneClassOnly);
    }

    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].partial_cmp(&scores[a]).expect("no NaN scores"));

    let mut points = vec![(0.0, 0.0)];
    let (mut tp, mut fp) = (0u64, 0u64);
    let mut prev_score = f64::INFINITY;
    for &i in &order {
        if scores[i] != prev_score {
            if prev_score.is_finite() {
                points.push((fp as f64 / negatives, tp as f64 / positives));
            }
            prev_score = scores[i];
        }
        if truth[i] {
            tp += 1;
        } else {
            fp += 1;
        }
    }
    points.push((1.0, 1.0));
    let auc = trapezoid_area(&points);
    Ok(RocCurve { points, auc })
}

/// Area under a piecewise-linear curve whose x-coordinates never decrease.
fn trapezoid_area(points: &[(f64, f64)]) -> f64 {
    points
        .windows(2)
        .map(|w| (w[1].0 - w[0].0) * (w[0].1 + w[1].1) / 2.0)
        .sum()
}

/// Micro and macro ROC aggregates of a one-score-per-class matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MulticlassRoc {
    /// Every (document, class) decision pooled into one binary problem.
    pub micro: RocCurve,
    /// Per-class curves averaged on a fixed grid of false positive rates.
    #[serde(rename = "macro")]
    pub macro_avg: RocCurve,
    /// Classes left out of the macro average because no document carries
    /// them.
    pub excluded_classes: Vec<usize>,
}

/// Number of points in the macro-average interpolation grid.
const MACRO_GRID: usize = 101;

/// Builds micro and macro ROC aggregates from per-document score rows.
/// `scores[d][c]` is the score of class `c` for document `d`; `truth[d]` is
/// the true class index. Classes with no positive documents are excluded
/// from the macro average and reported.
pub fn multiclass_roc(
    scores: &[Vec<f64>],
    truth: &[usize],
    n_classes: usize,
) -> Result<MulticlassRoc, EvalError> {
    if scores.len() != truth.len() {
        return Err(EvalError::LengthMismatch {
            left: truth.len(),
            right: scores.len(),
        });
    }
    if scores.is_empty() {
        return Err(EvalError::Empty);
    }
    if let Some(bad) = scores.iter().find(|row| row.len() != n_classes) {
        return Err(EvalError::InvalidParam(format!(
            "score row has {} entries, expected {n_classes}",
            bad.len()
        )));
    }
    if let Some(&bad) = truth.iter().find(|&&t| t >= n_classes) {
        return Err(EvalError::UnknownLabel(format!("class index {bad}")));
    }

    // Micro: flatten all (document, class) pairs into one binary problem.
    let mut flat_scores = Vec::with_capacity(scores.len() * n_classes);
    let mut flat_truth = Vec::with_capacity(scores.len() * n_classes);
    for (row, &t) in scores.iter().zip(truth) {
        for (c, &s) in row.iter().enumerate() {
            flat_scores.push(s);
            flat_truth.push(c == t);
        }
    }
    let micro = roc_auc(&flat_scores, &flat_truth)?;

    // Macro: average per-class curves over a shared FPR grid.
    let mut excluded_classes = Vec::new();
    let mut grid_tpr = vec![0.0f64; MACRO_GRID];
    let mut included = 0usize;
    for c in 0..n_classes {
        let class_truth: Vec<bool> = truth.iter().map(|&t| t == c).collect();
        if class_truth.iter().all(|&t| !t) {
            log::warn!("multiclass_roc: class {c} has no documents; excluded from macro average");
            excluded_classes.push(c);
            continue;
        }
        let class_scores: Vec<f64> = scores.iter().map(|row| row[c]).collect();
        let curve = roc_auc(&class_scores, &class_truth)?;
        for (i, slot) in grid_tpr.iter_mut().enumerate() {
            *slot += interpolate_tpr(&curve.points, i as f64 / (MACRO_GRID - 1) as f64);
        }
        included += 1;
    }
    if included == 0 {
        return Err(EvalError::OneClassOnly);
    }
    let mut points: Vec<(f64, f64)> = grid_tpr
        .iter()
        .enumerate()
        .map(|(i, &t)| (i as f64 / (MACRO_GRID - 1) as f64, t / included as f64))
        .collect();
    // The grid average starts at the curve origin by definition.
    points[0] = (0.0, 0.0);
    let auc = trapezoid_area(&points);
    Ok(MulticlassRoc {
        micro,
        macro_avg: RocCurve { points, auc },
        excluded_classes,
    })
}

/// Linear interpolation of the upper envelope of an ROC curve at `fpr`.
/// Vertical curve segments (repeated x) contribute their highest tpr.
fn interpolate_tpr(points: &[(f64, f64)], fpr: f64) -> f64 {
    debug_assert!(!points.is_empty());
    // Upper envelope: keep the max tpr per distinct fpr.
    let mut envelope: Vec<(f64, f64)> = Vec::with_capacity(points.len());
    for &(x, y) in points {
        match envelope.last_mut() {
            Some(last) if last.0 == x => last.1 = last.1.max(y),
            _ => envelope.push((x, y)),
        }
    }
    if fpr <= envelope[0].0 {
        return envelope[0].1;
    }
    for w in envelope.windows(2) {
        let (x0, y0) = w[0];
        let (x1, y1) = w[1];
        if fpr <= x1 {
            return y0 + (y1 - y0) * (fpr - x0) / (x1 - x0);
        }
    }
    envelope.last().expect("non-empty").1
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Rank-sum AUC: the fraction of (positive, negative) pairs ranked
    /// correctly, ties counting half.
    fn pair_counting_auc(scores: &[f64], truth: &[bool]) -> f64 {
        let mut wins = 0.0f64;
        let mut pairs = 0.0f64;
        for (i, &ti) in truth.iter().enumerate() {
            if !ti {
                continue;
            }
            for (j, &tj) in truth.iter().enumerate() {
                if tj {
                    continue;
                }
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
        wins / pairs
    }

    #[test]
    fn separable_scores_give_unit_auc() {
        let scores = [0.9, 0.8, 0.2, 0.1];
        let truth = [true, true, false, false];
        let curve = roc_auc(&scores, &truth).unwrap();
        assert_eq!(curve.auc, 1.0);
        assert_eq!(curve.points.first(), Some(&(0.0, 0.0)));
        assert_eq!(curve.points.last(), Some(&(1.0, 1.0)));
    }

    #[test]
    fn reversed_scores_give_zero_auc() {
        let scores = [0.1, 0.2, 0.8, 0.9];
        let truth = [true, true, false, false];
        assert_eq!(roc_auc(&scores, &truth).unwrap().auc, 0.0);
    }

    #[test]
    fn all_tied_scores_give_half() {
        let scores = [0.5; 6];
        let truth = [true, false, true, false, true, false];
        let curve = roc_auc(&scores, &truth).unwrap();
        assert_eq!(curve.auc, 0.5);
        // One threshold only: straight diagonal.
        assert_eq!(curve.points, vec![(0.0, 0.0), (1.0, 1.0)]);
    }

    #[test]
    fn known_small_curve() {
        // Scores: pos 0.8, neg 0.6, pos 0.4, neg 0.2. Sweeping thresholds
        // walks (0,0) -> (0,.5) -> (.5,.5) -> (.5,1) -> (1,1): AUC 0.75.
        let scores = [0.8, 0.6, 0.4, 0.2];
        let truth = [true, false, true, false];
        let curve = roc_auc(&scores, &truth).unwrap();
        assert_eq!(curve.auc, 0.75);
        assert_eq!(
            curve.points,
            vec![(0.0, 0.0), (0.0, 0.5), (0.5, 0.5), (0.5, 1.0), (1.0, 1.0)]
        );
    }

    #[test]
    fn rejects_degenerate_inputs() {
        assert!(matches!(
            roc_auc(&[0.1, 0.2], &[true, true]),
            Err(EvalError::OneClassOnly)
        ));
        assert!(matches!(
            roc_auc(&[], &[]),
            Err(EvalError::Empty)
        ));
        assert!(roc_auc(&[f64::NAN, 0.3], &[true, false]).is_err());
        assert!(matches!(
            roc_auc(&[0.5], &[true, false]),
            Err(EvalError::LengthMismatch { .. })
        ));
    }

    #[test]
    fn micro_pools_all_decisions() {
        let scores = vec![
            vec![0.7, 0.2, 0.1],
            vec![0.1, 0.8, 0.1],
            vec![0.3, 0.3, 0.4],
            vec![0.5, 0.4, 0.1],
        ];
        let truth = vec![0, 1, 2, 0];
        let agg = multiclass_roc(&scores, &truth, 3).unwrap();
        let mut flat_scores = Vec::new();
        let mut flat_truth = Vec::new();
        for (row, &t) in scores.iter().zip(&truth) {
            for (c, &s) in row.iter().enumerate() {
                flat_scores.push(s);
                flat_truth.push(c == t);
            }
        }
        assert_eq!(agg.micro, roc_auc(&flat_scores, &flat_truth).unwrap());
        assert!(agg.excluded_classes.is_empty());
    }

    #[test]
    fn macro_excludes_absent_classes() {
        let scores = vec![vec![0.9, 0.1, 0.3], vec![0.2, 0.8, 0.1], vec![0.6, 0.3, 0.2]];
        let truth = vec![0, 1, 0];
        let agg = multiclass_roc(&scores, &truth, 3).unwrap();
        assert_eq!(agg.excluded_classes, vec![2]);
        assert_eq!(agg.macro_avg.points.len(), 101);
        assert_eq!(agg.macro_avg.points[0], (0.0, 0.0));
        assert_eq!(agg.macro_avg.points[100], (1.0, 1.0));
    }

    #[test]
    fn macro_of_perfect_scores_is_one() {
        // Perfectly separated per-class scores: every per-class curve is the
        // unit step, and the grid average keeps AUC at 1 up to the forced
        // origin point.
        let truth = vec![0, 1, 2, 0, 1, 2];
        let scores: Vec<Vec<f64>> = truth
            .iter()
            .map(|&t| (0..3).map(|c| if c == t { 1.0 } else { 0.0 }).collect())
            .collect();
        let agg = multiclass_roc(&scores, &truth, 3).unwrap();
        assert!(agg.macro_avg.auc > 0.99);
        assert_eq!(agg.micro.auc, 1.0);
    }

    proptest! {
        /// The sweep construction must agree with pair counting to within
        /// accumulation noise, including under heavy ties.
        #[test]
        fn trapezoid_equals_pair_counting(
            raw in proptest::collection::vec((0u8..8, proptest::bool::ANY), 2..100)
        ) {
            let scores: Vec<f64> = raw.iter().map(|&(s, _)| s as f64 / 4.0).collect();
            let truth: Vec<bool> = raw.iter().map(|&(_, t)| t).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let curve = roc_auc(&scores, &truth).unwrap();
            let oracle = pair_counting_auc(&scores, &truth);
            prop_assert!((curve.auc - oracle).abs() < 1e-12);
        }

        /// Curve endpoints and monotonicity hold for arbitrary scores.
        #[test]
        fn curve_is_monotone(
            raw in proptest::collection::vec((-1000i32..1000, proptest::bool::ANY), 2..80)
        ) {
            let scores: Vec<f64> = raw.iter().map(|&(s, _)| s as f64 * 0.001).collect();
            let truth: Vec<bool> = raw.iter().map(|&(_, t)| t).collect();
            prop_assume!(truth.iter().any(|&t| t) && truth.iter().any(|&t| !t));
            let curve = roc_auc(&scores, &truth).unwrap();
            prop_assert_eq!(curve.points[0], (0.0, 0.0));
            prop_assert_eq!(*curve.points.last().unwrap(), (1.0, 1.0));
            for w in curve.points.windows(2) {
                prop_assert!(w[1].0 >= w[0].0);
                prop_assert!(w[1].1 >= w[0].1);
            }
            prop_assert!((0.0..=1.0).contains(&curve.auc));
        }
    }
}
