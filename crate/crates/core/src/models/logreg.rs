//! L2-regularized logistic regression.
//!
//! The trainer minimizes
//!
//! ```text
//! (1/(2C))·‖w‖² + Σᵢ cwᵢ · ln(1 + exp(−zᵢ(w·xᵢ + b)))
//! ```
//!
//! where zᵢ ∈ {−1, +1} encodes the binary label, cwᵢ is the class weight,
//! and the bias b is not regularized. The objective is strictly convex in
//! w, so any solver reaching the gradient tolerance finds the same optimum.

use serde::{Deserialize, Serialize};

use super::{check_binary_inputs, optimize, sparse_dot, ModelError};
use crate::features::DocTermMatrix;

/// Trainer settings. `class_weights` scales the loss of (positive,
/// negative) examples; both default to 1, weighting the classes equally.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegConfig {
    pub c: f64,
    pub class_weights: (f64, f64),
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for LogRegConfig {
    fn default() -> Self {
        LogRegConfig {
            c: 1.0,
            class_weights: (1.0, 1.0),
            tol: 1e-6,
            max_iter: 1000,
        }
    }
}

/// A fitted logistic regression: one weight per vocabulary feature plus an
/// unregularized bias.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRegModel {
    weights: Vec<f64>,
    bias: f64,
    c: f64,
    class_weights: (f64, f64),
}

impl LogRegModel {
    pub fn n_features(&self) -> usize {
        self.weights.len()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Log-odds of the positive class: w·x + b.
    pub fn decision(&self, row: &[(u32, f64)]) -> Result<f64, ModelError> {
        check_row(row, self.weights.len())?;
        Ok(sparse_dot(row, &self.weights) + self.bias)
    }

    /// Probability of the positive class via the logistic function.
    pub fn probability(&self, row: &[(u32, f64)]) -> Result<f64, ModelError> {
        Ok(sigmoid(self.decision(row)?))
    }

    /// True when the positive class is predicted; the boundary p = 0.5 is
    /// classified positive.
    pub fn predict(&self, row: &[(u32, f64)]) -> Result<bool, ModelError> {
        Ok(self.probability(row)? >= 0.5)
    }
}

fn check_row(row: &[(u32, f64)], n_features: usize) -> Result<(), ModelError> {
    match row.iter().map(|&(t, _)| t as usize).max() {
        Some(max) if max >= n_features => Err(ModelError::DimensionMismatch {
            expected: n_features,
            got: max + 1,
        }),
        _ => Ok(()),
    }
}

fn sigmoid(u: f64) -> f64 {
    if u >= 0.0 {
        1.0 / (1.0 + (-u).exp())
    } else {
        let e = u.exp();
        e / (1.0 + e)
    }
}

/// ln(1 + exp(u)) without overflow for large |u|.
fn softplus(u: f64) -> f64 {
    if u > 0.0 {
        u + (-u).exp().ln_1p()
    } else {
        u.exp().ln_1p()
    }
}

/// Evaluates the training objective at an arbitrary parameter vector laid
/// out as `[w₀, …, w_{V−1}, b]`. Exposed so solver output can be audited
/// against independent optimizers.
pub fn logistic_objective(x: &DocTermMatrix, y: &[bool], cfg: &LogRegConfig, params: &[f64]) -> f64 {
    assert_eq!(params.len(), x.n_features() + 1, "params must be [w..., b]");
    let (weights, bias) = params.split_at(x.n_features());
    let mut value = weights.iter().map(|w| w * w).sum::<f64>() / (2.0 * cfg.c);
    for (row, &pos) in x.rows().zip(y) {
        let z = if pos { 1.0 } else { -1.0 };
        let cw = if pos { cfg.class_weights.0 } else { cfg.class_weights.1 };
        let f = sparse_dot(row, weights) + bias[0];
        value += cw * softplus(-z * f);
    }
    value
}

/// Gradient of [`logistic_objective`] with the same parameter layout.
pub fn logistic_gradient(
    x: &DocTermMatrix,
    y: &[bool],
    cfg: &LogRegConfig,
    params: &[f64],
) -> Vec<f64> {
    let mut grad = vec![0.0; params.len()];
    value_and_gradient(x, y, cfg, params, &mut grad);
    grad
}

/// Fused objective/gradient evaluation; one pass over the matrix.
fn value_and_gradient(
    x: &DocTermMatrix,
    y: &[bool],
    cfg: &LogRegConfig,
    params: &[f64],
    grad: &mut [f64],
) -> f64 {
    let v = x.n_features();
    let (weights, bias) = params.split_at(v);
    let mut value = 0.0;
    for (g, w) in grad[..v].iter_mut().zip(weights) {
        *g = w / cfg.c;
        value += w * w;
    }
    value /= 2.0 * cfg.c;
    grad[v] = 0.0;
    for (row, &pos) in x.rows().zip(y) {
        let z = if pos { 1.0 } else { -1.0 };
        let cw = if pos { cfg.class_weights.0 } else { cfg.class_weights.1 };
        let f = sparse_dot(row, weights) + bias[0];
        value += cw * softplus(-z * f);
        // d/df softplus(−z·f) = −z·σ(−z·f)
        let coef = -cw * z * sigmoid(-z * f);
        for &(t, xv) in row {
            grad[t as usize] += coef * xv;
        }
        grad[v] += coef;
    }
    value
}

/// Fits the model by quasi-Newton minimization from a zero start. Logs a
/// warning when the gradient tolerance is not met within `max_iter`.
pub fn train_logreg(
    x: &DocTermMatrix,
    y: &[bool],
    cfg: &LogRegConfig,
) -> Result<LogRegModel, ModelError> {
    check_binary_inputs(x, y)?;
    check_positive_finite("C", cfg.c)?;
    check_positive_finite("class_weights", cfg.class_weights.0)?;
    check_positive_finite("class_weights", cfg.class_weights.1)?;
    check_positive_finite("tol", cfg.tol)?;
    if cfg.max_iter == 0 {
        return Err(ModelError::InvalidParam {
            name: "max_iter",
            reason: "must be at least 1".into(),
        });
    }

    let start = vec![0.0; x.n_features() + 1];
    let result = optimize::minimize(
        |params, grad| value_and_gradient(x, y, cfg, params, grad),
        start,
        cfg.tol,
        cfg.max_iter,
    );
    if !result.converged {
        log::warn!(
            "logistic regression stopped at max_iter={} with gradient norm {:.3e} (tol {:.3e})",
            cfg.max_iter,
            result.grad_norm,
            cfg.tol
        );
    }
    log::debug!(
        "logistic regression: {} iterations, objective {:.6e} -> {:.6e}",
        result.iterations,
        result.history[0],
        result.value
    );
    let mut params = result.x;
    let bias = params.pop().expect("params include a bias entry");
    Ok(LogRegModel {
        weights: params,
        bias,
        c: cfg.c,
        class_weights: cfg.class_weights,
    })
}

fn check_positive_finite(name: &'static str, v: f64) -> Result<(), ModelError> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(ModelError::InvalidParam {
            name,
            reason: format!("must be positive and finite, got {v}"),
        })
    }
}
