//! Classifier families and multiclass wrappers.
//!
//! Three binary families are provided: L2-regularized logistic regression,
//! a linear support vector machine, and a Gini-impurity decision tree.
//! Multiclass tasks wrap any family in a one-vs-rest or one-vs-one scheme.
//! All trainers are deterministic: the same matrix, labels, and
//! configuration always produce the same parameters.

mod logreg;
mod multiclass;
mod optimize;
mod svm;
mod tree;

pub use logreg::{logistic_gradient, logistic_objective, train_logreg, LogRegConfig, LogRegModel};
pub use multiclass::{train_ovo, train_ovr, OvoMember, OvoModel, OvrModel};
pub use svm::{svm_objective, train_linear_svm, LinearSvmModel, SvmConfig};
pub use tree::{train_tree, DecisionTreeModel, TreeConfig, TreeNode};

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Errors produced by trainers and predictors.
#[derive(Debug, Error)]
pub enum ModelError {
    #[error("training labels contain a single class only")]
    SingleClass,
    #[error("label/matrix length mismatch: {labels} labels for {docs} documents")]
    LengthMismatch { labels: usize, docs: usize },
    #[error("input has {got} features but the model expects {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("training matrix is empty")]
    EmptyInput,
    #[error("invalid {name}: {reason}")]
    InvalidParam { name: &'static str, reason: String },
    #[error("class {class} has no training documents")]
    EmptyClass { class: String },
    #[error("multiclass training needs at least 2 classes, got {0}")]
    TooFewClasses(usize),
}

/// Which binary classifier family a model belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    Logreg,
    Svm,
    Tree,
}

impl std::fmt::Display for ModelFamily {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ModelFamily::Logreg => "logreg",
            ModelFamily::Svm => "svm",
            ModelFamily::Tree => "tree",
        })
    }
}

/// A classified example: the winning class index plus the per-class scores
/// that produced it.
///
/// Scores are probabilities for logistic regression and trees and raw
/// margins for SVMs; either way the label is the argmax with ties resolved
/// to the lowest class index (one-vs-one voting refines ties with summed
/// member decisions before falling back to the lowest index).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub class_index: usize,
    pub scores: Vec<f64>,
}

/// Index of the largest score, lowest index winning ties.
///
/// Panics on an empty slice; callers always pass at least two scores.
pub fn argmax_tie_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, s) in scores.iter().enumerate().skip(1) {
        if *s > scores[best] {
            best = i;
        }
    }
    best
}

/// A trained binary classifier of any family.
///
/// The serialized form carries a `kind` tag so model files stay
/// self-describing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BinaryModel {
    Logreg(LogRegModel),
    Svm(LinearSvmModel),
    Tree(DecisionTreeModel),
}

impl BinaryModel {
    pub fn family(&self) -> ModelFamily {
        match self {
            BinaryModel::Logreg(_) => ModelFamily::Logreg,
            BinaryModel::Svm(_) => ModelFamily::Svm,
            BinaryModel::Tree(_) => ModelFamily::Tree,
        }
    }

    pub fn n_features(&self) -> usize {
        match self {
            BinaryModel::Logreg(m) => m.n_features(),
            BinaryModel::Svm(m) => m.n_features(),
            BinaryModel::Tree(m) => m.n_features(),
        }
    }

    /// Per-class ranking score used by one-vs-rest aggregation: log-odds
    /// for logistic regression, margin for the SVM, and the leaf
    /// probability of the positive class for trees.
    pub fn ovr_score(&self, row: &[(u32, f64)]) -> Result<f64, ModelError> {
        match self {
            BinaryModel::Logreg(m) => m.decision(row),
            BinaryModel::Svm(m) => m.decision(row),
            BinaryModel::Tree(m) => Ok(m.predict(row)?.scores[0]),
        }
    }

    /// Signed decision used by one-vs-one voting: non-negative means a
    /// vote for the member's positive class. Tree leaf probabilities are
    /// centered at 0.5 so all families share the sign convention.
    pub fn signed_decision(&self, row: &[(u32, f64)]) -> Result<f64, ModelError> {
        match self {
            BinaryModel::Logreg(m) => m.decision(row),
            BinaryModel::Svm(m) => m.decision(row),
            BinaryModel::Tree(m) => Ok(m.predict(row)?.scores[0] - 0.5),
        }
    }

    /// Binary prediction with two-class scores, positive class at index 0.
    pub fn predict(&self, row: &[(u32, f64)]) -> Result<Prediction, ModelError> {
        match self {
            BinaryModel::Logreg(m) => {
                let p = m.probability(row)?;
                Ok(Prediction {
                    class_index: usize::from(p < 0.5),
                    scores: vec![p, 1.0 - p],
                })
            }
            BinaryModel::Svm(m) => {
                let d = m.decision(row)?;
                Ok(Prediction {
                    class_index: usize::from(d < 0.0),
                    scores: vec![d, -d],
                })
            }
            BinaryModel::Tree(m) => m.predict(row),
        }
    }

    /// Linear coefficient vector, if the family has one.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match self {
            BinaryModel::Logreg(m) => Some(m.weights()),
            BinaryModel::Svm(m) => Some(m.weights()),
            BinaryModel::Tree(_) => None,
        }
    }
}

/// Family-tagged trainer configuration: selects which binary family to fit
/// and carries that family's settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum BinaryTrainer {
    Logreg(LogRegConfig),
    Svm(SvmConfig),
    Tree(TreeConfig),
}

impl BinaryTrainer {
    pub fn family(&self) -> ModelFamily {
        match self {
            BinaryTrainer::Logreg(_) => ModelFamily::Logreg,
            BinaryTrainer::Svm(_) => ModelFamily::Svm,
            BinaryTrainer::Tree(_) => ModelFamily::Tree,
        }
    }

    /// Trains one binary member. For trees the boolean labels map to class
    /// indices 0 (positive) and 1 (negative), matching the binary schema
    /// order.
    pub fn train(
        &self,
        x: &crate::features::DocTermMatrix,
        y: &[bool],
    ) -> Result<BinaryModel, ModelError> {
        match self {
            BinaryTrainer::Logreg(cfg) => train_logreg(x, y, cfg).map(BinaryModel::Logreg),
            BinaryTrainer::Svm(cfg) => train_linear_svm(x, y, cfg).map(BinaryModel::Svm),
            BinaryTrainer::Tree(cfg) => {
                let labels: Vec<usize> = y.iter().map(|&pos| usize::from(!pos)).collect();
                train_tree(x, &labels, 2, cfg).map(BinaryModel::Tree)
            }
        }
    }
}

/// Tokens paired with their linear coefficients.
pub type TokenWeights = Vec<(String, f64)>;

/// Tokens carrying the `n` highest and `n` lowest linear coefficients.
///
/// Within equal coefficients the order is lexicographic, so the listing is
/// deterministic. `top` is sorted by coefficient descending, `bottom`
/// ascending. `n` is clamped to the vocabulary size.
pub fn top_coefficients(
    weights: &[f64],
    vocab: &crate::features::Vocabulary,
    n: usize,
) -> (TokenWeights, TokenWeights) {
    debug_assert_eq!(weights.len(), vocab.len());
    let tokens = vocab.tokens();
    let mut ranked: Vec<(usize, f64)> = weights.iter().copied().enumerate().collect();
    ranked.sort_by(|a, b| {
        b.1.partial_cmp(&a.1)
            .expect("model weights are finite")
            .then_with(|| tokens[a.0].cmp(&tokens[b.0]))
    });
    let n = n.min(ranked.len());
    let top = ranked[..n]
        .iter()
        .map(|&(i, w)| (tokens[i].clone(), w))
        .collect();
    let bottom = ranked[ranked.len() - n..]
        .iter()
        .rev()
        .map(|&(i, w)| (tokens[i].clone(), w))
        .collect();
    (top, bottom)
}

/// Dot product of a sparse row with a dense weight vector.
pub(crate) fn sparse_dot(row: &[(u32, f64)], weights: &[f64]) -> f64 {
    row.iter().map(|&(t, v)| v * weights[t as usize]).sum()
}

/// Shared trainer input validation: non-empty matrix, matching label
/// length, and both classes present.
pub(crate) fn check_binary_inputs(
    x: &crate::features::DocTermMatrix,
    y: &[bool],
) -> Result<(), ModelError> {
    if x.n_docs() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.n_docs() != y.len() {
        return Err(ModelError::LengthMismatch {
            labels: y.len(),
            docs: x.n_docs(),
        });
    }
    if y.iter().all(|&b| b) || y.iter().all(|&b| !b) {
        return Err(ModelError::SingleClass);
    }
    Ok(())
}
