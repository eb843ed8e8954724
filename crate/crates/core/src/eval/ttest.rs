//! Welch's two-sample t-test from summary statistics.

use serde::Serialize;

use super::special::student_t_sf;
use super::EvalError;

/// Outcome of a Welch test. `degenerate` flags zero pooled variance, where
/// the statistic is reported as infinite (or zero for equal means) instead
/// of dividing by zero.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TTestResult {
    pub t: f64,
    pub df: f64,
    /// Two-tailed p-value.
    pub p: f64,
    pub degenerate: bool,
}

/// Welch's unequal-variance t-test on summary statistics, with
/// Welch-Satterthwaite degrees of freedom. `std1`/`std2` are sample standard
/// deviations; both sample sizes must be at least 2.
pub fn welch_ttest(
    mean1: f64,
    std1: f64,
    n1: usize,
    mean2: f64,
    std2: f64,
    n2: usize,
) -> Result<TTestResult, EvalError> {
    for (name, v) in [("mean1", mean1), ("std1", std1), ("mean2", mean2), ("std2", std2)] {
        if !v.is_finite() {
            return Err(EvalError::InvalidParam(format!("{name} is not finite")));
        }
    }
    if std1 < 0.0 || std2 < 0.0 {
        return Err(EvalError::InvalidParam("standard deviations must be non-negative".into()));
    }
    if n1 < 2 || n2 < 2 {
        return Err(EvalError::InvalidParam("both samples need at least 2 observations".into()));
    }

    let v1 = std1 * std1 / n1 as f64;
    let v2 = std2 * std2 / n2 as f64;
    let se2 = v1 + v2;
    let diff = mean1 - mean2;

    if se2 == 0.0 {
        // Both variances are zero: every draw is the mean, so any difference
        // is infinitely significant and no difference at all is certain.
        let (t, p) = if diff == 0.0 {
            (0.0, 1.0)
        } else {
            (diff.signum() * f64::INFINITY, 0.0)
        };
        return Ok(TTestResult { t, df: f64::INFINITY, p, degenerate: true });
    }

    let df = se2 * se2 / (v1 * v1 / (n1 as f64 - 1.0) + v2 * v2 / (n2 as f64 - 1.0));
    let t = diff / se2.sqrt();
    let p = 2.0 * student_t_sf(t.abs(), df);
    Ok(TTestResult { t, df, p, degenerate: false })
}
