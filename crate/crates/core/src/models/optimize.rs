//! Deterministic full-batch minimizer used by the logistic regression
//! trainer.
//!
//! Limited-memory BFGS with Armijo backtracking. The objective supplied by
//! the caller must be convex and differentiable; under that assumption the
//! minimizer converges to the global optimum, so solver details cannot move
//! the fitted parameters beyond the convergence tolerance.

/// Outcome of a minimization run.
#[derive(Debug, Clone)]
pub(crate) struct OptimizeResult {
    /// Final parameter vector.
    pub x: Vec<f64>,
    /// Objective value at `x`.
    pub value: f64,
    /// Euclidean norm of the gradient at `x`.
    pub grad_norm: f64,
    /// Number of accepted iterations.
    pub iterations: usize,
    /// Whether the gradient-norm tolerance was reached before `max_iter`.
    pub converged: bool,
    /// Objective value after each accepted iteration, starting with the
    /// value at the initial point. Armijo acceptance makes this sequence
    /// non-increasing.
    pub history: Vec<f64>,
}

/// Number of curvature pairs retained for the two-loop recursion.
const MEMORY: usize = 10;
/// Sufficient-decrease constant for the Armijo condition.
const ARMIJO_C1: f64 = 1e-4;
/// Step shrink factor during backtracking.
const BACKTRACK: f64 = 0.5;
/// Maximum number of backtracking halvings before the search gives up.
const MAX_BACKTRACK: usize = 60;

/// Minimizes `f` starting from `x0`, stopping when the gradient norm drops
/// to `tol` or after `max_iter` accepted steps.
///
/// `f` evaluates the objective at its first argument and writes the
/// gradient into its second (same length as `x0`). The routine is fully
/// deterministic: identical inputs produce identical iterates.
pub(crate) fn minimize<F>(mut f: F, x0: Vec<f64>, tol: f64, max_iter: usize) -> OptimizeResult
where
    F: FnMut(&[f64], &mut [f64]) -> f64,
{
    let n = x0.len();
    let mut x = x0;
    let mut grad = vec![0.0; n];
    let mut value = f(&x, &mut grad);
    let mut history = vec![value];

    // Curvature pairs (s, y, 1/(s.y)) in insertion order, oldest first.
    let mut pairs: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    let mut iterations = 0;

    while iterations < max_iter {
        let grad_norm = norm(&grad);
        if grad_norm <= tol {
            return OptimizeResult {
                x,
                value,
                grad_norm,
                iterations,
                converged: true,
                history,
            };
        }

        let direction = two_loop_direction(&grad, &pairs);
        let slope: f64 = dot(&direction, &grad);
        // A non-descent direction means the curvature memory is stale;
        // fall back to steepest descent.
        let (direction, slope) = if slope < 0.0 {
            (direction, slope)
        } else {
            pairs.clear();
            let d: Vec<f64> = grad.iter().map(|g| -g).collect();
            let s = dot(&d, &grad);
            (d, s)
        };

        // Backtracking line search enforcing the Armijo condition.
        let mut step = 1.0;
        let mut accepted = None;
        let mut trial_grad = vec![0.0; n];
        for _ in 0..=MAX_BACKTRACK {
            let trial: Vec<f64> = x
                .iter()
                .zip(&direction)
                .map(|(xi, di)| xi + step * di)
                .collect();
            let trial_value = f(&trial, &mut trial_grad);
            if trial_value.is_finite() && trial_value <= value + ARMIJO_C1 * step * slope {
                accepted = Some((trial, trial_value));
                break;
            }
            step *= BACKTRACK;
        }
        let Some((new_x, new_value)) = accepted else {
            // No step achieves sufficient decrease: the iterate is at the
            // limit of floating-point resolution for this objective.
            break;
        };

        let s: Vec<f64> = new_x.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = trial_grad.iter().zip(&grad).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        // Only store pairs with meaningful positive curvature; degenerate
        // pairs would corrupt the inverse-Hessian estimate.
        if sy > 1e-10 * norm(&s) * norm(&y) {
            if pairs.len() == MEMORY {
                pairs.remove(0);
            }
            pairs.push((s, y, 1.0 / sy));
        }

        x = new_x;
        value = new_value;
        grad.copy_from_slice(&trial_grad);
        iterations += 1;
        history.push(value);
    }

    let grad_norm = norm(&grad);
    OptimizeResult {
        x,
        value,
        grad_norm,
        iterations,
        converged: grad_norm <= tol,
        history,
    }
}

/// Computes the search direction -H·g via the standard two-loop recursion
/// over the stored curvature pairs.
fn two_loop_direction(grad: &[f64], pairs: &[(Vec<f64>, Vec<f64>, f64)]) -> Vec<f64> {
    let mut q: Vec<f64> = grad.to_vec();
    let mut alphas = vec![0.0; pairs.len()];
    for (idx, (s, y, rho)) in pairs.iter().enumerate().rev() {
        let alpha = rho * dot(s, &q);
        alphas[idx] = alpha;
        for (qi, yi) in q.iter_mut().zip(y) {
            *qi -= alpha * yi;
        }
    }
    // Initial inverse-Hessian scaling from the most recent pair.
    if let Some((s, y, _)) = pairs.last() {
        let gamma = dot(s, y) / dot(y, y);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
    }
    for (idx, (s, y, rho)) in pairs.iter().enumerate() {
        let beta = rho * dot(y, &q);
        let alpha = alphas[idx];
        for (qi, si) in q.iter_mut().zip(s) {
            *qi += (alpha - beta) * si;
        }
    }
    for qi in q.iter_mut() {
        *qi = -*qi;
    }
    q
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}
