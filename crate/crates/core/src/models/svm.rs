//! Linear soft-margin support vector machine.
//!
//! The model minimizes the primal objective
//!
//! ```text
//! (1/2)·‖w‖² + C · Σᵢ max(0, 1 − zᵢ(w·xᵢ + b))
//! ```
//!
//! Training runs sequential minimal optimization on the equivalent dual:
//! repeatedly pick the maximal violating pair of dual variables, solve the
//! two-variable subproblem analytically, and stop when the
//! Karush-Kuhn-Tucker violation gap falls below the tolerance. The weight
//! vector is maintained alongside the dual variables, so the fitted model
//! stores plain primal parameters. The affine kernel constant folds into
//! the bias, which the dual's equality constraint models exactly.

use serde::{Deserialize, Serialize};

use super::{check_binary_inputs, sparse_dot, ModelError};
use crate::features::DocTermMatrix;

/// Trainer settings. `tol` bounds the final KKT violation gap.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvmConfig {
    pub c: f64,
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SvmConfig {
    fn default() -> Self {
        SvmConfig {
            c: 1.0,
            tol: 1e-8,
            max_iter: 1_000_000,
        }
    }
}

/// A fitted linear SVM: weight vector plus bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearSvmModel {
    weights: Vec<f64>,
    bias: f64,
    c: f64,
}

impl LinearSvmModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Signed margin w·x + b.
    pub fn decision(&self, row: &[(u32, f64)]) -> Result<f64, ModelError> {
        match row.iter().map(|&(t, _)| t as usize).max() {
            Some(max) if max >= self.weights.len() => Err(ModelError::DimensionMismatch {
                expected: self.weights.len(),
                got: max + 1,
            }),
            _ => Ok(sparse_dot(row, &self.weights) + self.bias),
        }
    }

    /// True when the positive class is predicted; margin 0 counts as
    /// positive, mirroring the logistic p = 0.5 rule.
    pub fn predict(&self, row: &[(u32, f64)]) -> Result<bool, ModelError> {
        Ok(self.decision(row)? >= 0.0)
    }
}

/// Evaluates the primal objective at parameters laid out as
/// `[w₀, …, w_{V−1}, b]`. Exposed so solver output can be audited against
/// independent optimizers.
pub fn svm_objective(x: &DocTermMatrix, y: &[bool], c: f64, params: &[f64]) -> f64 {
    assert_eq!(params.len(), x.n_features() + 1, "params must be [w..., b]");
    let (weights, bias) = params.split_at(x.n_features());
    let reg = 0.5 * weights.iter().map(|w| w * w).sum::<f64>();
    let hinge: f64 = x
        .rows()
        .zip(y)
        .map(|(row, &pos)| {
            let z = if pos { 1.0 } else { -1.0 };
            (1.0 - z * (sparse_dot(row, weights) + bias[0])).max(0.0)
        })
        .sum();
    reg + c * hinge
}

/// Curvature floor for degenerate pairs (duplicate documents).
const TAU: f64 = 1e-12;

/// Fits the model by SMO. Logs a warning when the KKT gap is still above
/// `tol` after `max_iter` pair updates.
pub fn train_linear_svm(
    x: &DocTermMatrix,
    y: &[bool],
    cfg: &SvmConfig,
) -> Result<LinearSvmModel, ModelError> {
    check_binary_inputs(x, y)?;
    if !(cfg.c.is_finite() && cfg.c > 0.0) {
        return Err(ModelError::InvalidParam {
            name: "C",
            reason: format!("must be positive and finite, got {}", cfg.c),
        });
    }
    if !(cfg.tol.is_finite() && cfg.tol > 0.0) {
        return Err(ModelError::InvalidParam {
            name: "tol",
            reason: format!("must be positive and finite, got {}", cfg.tol),
        });
    }

    let n = x.n_docs();
    let c = cfg.c;
    let z: Vec<f64> = y.iter().map(|&pos| if pos { 1.0 } else { -1.0 }).collect();
    let self_dot: Vec<f64> = x
        .rows()
        .map(|row| row.iter().map(|&(_, v)| v * v).sum())
        .collect();

    let mut alpha = vec![0.0; n];
    let mut w = vec![0.0; x.n_features()];
    let mut margins = vec![0.0; n];
    let mut bias = 0.0;
    let mut converged = false;

    for _ in 0..cfg.max_iter {
        // Violation scan: m over the index set still allowed to grow in
        // the ascent direction, M over the set allowed to shrink. Strict
        // comparisons keep tie-breaking at the lowest index.
        let mut m_val = f64::NEG_INFINITY;
        let mut m_idx = usize::MAX;
        let mut big_m_val = f64::INFINITY;
        let mut big_m_idx = usize::MAX;
        for i in 0..n {
            margins[i] = sparse_dot(x.row(i), &w);
            let viol = z[i] - margins[i];
            let in_up = (z[i] > 0.0 && alpha[i] < c) || (z[i] < 0.0 && alpha[i] > 0.0);
            let in_low = (z[i] < 0.0 && alpha[i] < c) || (z[i] > 0.0 && alpha[i] > 0.0);
            if in_up && viol > m_val {
                m_val = viol;
                m_idx = i;
            }
            if in_low && viol < big_m_val {
                big_m_val = viol;
                big_m_idx = i;
            }
        }
        // The equality constraint keeps both index sets non-empty while
        // both classes are present.
        debug_assert!(m_idx != usize::MAX && big_m_idx != usize::MAX);
        if m_val - big_m_val <= cfg.tol {
            bias = 0.5 * (m_val + big_m_val);
            converged = true;
            break;
        }

        let (i, j) = (m_idx, big_m_idx);
        let k_ij = pair_dot(x.row(i), x.row(j));
        let eta = (self_dot[i] + self_dot[j] - 2.0 * k_ij).max(TAU);

        // Two-variable subproblem: move alpha[j] along the constraint line
        // and clip to the box.
        let (lo, hi) = if z[i] * z[j] < 0.0 {
            ((alpha[j] - alpha[i]).max(0.0), (c + alpha[j] - alpha[i]).min(c))
        } else {
            ((alpha[i] + alpha[j] - c).max(0.0), (alpha[i] + alpha[j]).min(c))
        };
        let raw = alpha[j] - z[j] * (m_val - big_m_val) / eta;
        let clipped = raw.clamp(lo, hi);
        let delta_j = clipped - alpha[j];
        if delta_j == 0.0 {
            // Progress has hit floating-point resolution; the remaining
            // gap cannot be closed.
            bias = 0.5 * (m_val + big_m_val);
            break;
        }
        let delta_i = -z[i] * z[j] * delta_j;
        alpha[i] += delta_i;
        alpha[j] += delta_j;
        for &(t, v) in x.row(i) {
            w[t as usize] += delta_i * z[i] * v;
        }
        for &(t, v) in x.row(j) {
            w[t as usize] += delta_j * z[j] * v;
        }
    }

    if !converged {
        // Recover the best bias estimate from the final iterate.
        let (m_val, big_m_val) = kkt_bounds(x, &z, &alpha, &w, c);
        bias = 0.5 * (m_val + big_m_val);
        log::warn!(
            "svm stopped before reaching tol={:.1e}; final KKT gap {:.3e}",
            cfg.tol,
            m_val - big_m_val
        );
    }

    Ok(LinearSvmModel {
        weights: w,
        bias,
        c,
    })
}

fn kkt_bounds(
    x: &DocTermMatrix,
    z: &[f64],
    alpha: &[f64],
    w: &[f64],
    c: f64,
) -> (f64, f64) {
    let mut m_val = f64::NEG_INFINITY;
    let mut big_m_val = f64::INFINITY;
    for (i, row) in x.rows().enumerate() {
        let viol = z[i] - sparse_dot(row, w);
        if ((z[i] > 0.0 && alpha[i] < c) || (z[i] < 0.0 && alpha[i] > 0.0)) && viol > m_val {
            m_val = viol;
        }
        if ((z[i] < 0.0 && alpha[i] < c) || (z[i] > 0.0 && alpha[i] > 0.0)) && viol < big_m_val {
            big_m_val = viol;
        }
    }
    (m_val, big_m_val)
}

/// Dot product of two sorted sparse rows.
fn pair_dot(a: &[(u32, f64)], b: &[(u32, f64)]) -> f64 {
    let mut acc = 0.0;
    let (mut ia, mut ib) = (0, 0);
    while ia < a.len() && ib < b.len() {
        match a[ia].0.cmp(&b[ib].0) {
            std::cmp::Ordering::Less => ia += 1,
            std::cmp::Ordering::Greater => ib += 1,
            std::cmp::Ordering::Equal => {
                acc += a[ia].1 * b[ib].1;
                ia += 1;
                ib += 1;
            }
        }
    }
    acc
}
