//! Gini-impurity decision tree.
//!
//! Nodes are expanded until every leaf is pure or no split reduces
//! impurity, so conflict-free training data is always classified with
//! 100% accuracy. The split search scans features in ascending index
//! order and candidate thresholds (midpoints between consecutive distinct
//! sorted values, implicit zeros included) in ascending order, accepting
//! only strict improvements: equal-quality splits therefore resolve to the
//! lowest feature index and then the lowest threshold, which makes the
//! grown tree reproducible.

use serde::{Deserialize, Serialize};

use super::{argmax_tie_lowest, ModelError, Prediction};
use crate::features::DocTermMatrix;

/// Trainer settings. `max_depth: None` grows the tree without a depth
/// bound.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TreeConfig {
    pub max_depth: Option<usize>,
}

/// One node of the fitted tree; children are arena indices into
/// [`DecisionTreeModel::nodes`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Internal {
        feature: u32,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        class: usize,
        class_counts: Vec<u32>,
    },
}

/// A fitted decision tree. The root is node 0; `depth` is the edge count
/// of the longest root-to-leaf path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    nodes: Vec<TreeNode>,
    n_features: usize,
    n_classes: usize,
    depth: usize,
}

impl DecisionTreeModel {
    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn nodes(&self) -> &[TreeNode] {
        &self.nodes
    }

    /// Routes the document to a leaf: left child iff `x[feature] <=
    /// threshold`. Scores are the leaf's training class counts normalized
    /// to probabilities.
    pub fn predict(&self, row: &[(u32, f64)]) -> Result<Prediction, ModelError> {
        if let Some(max) = row.iter().map(|&(t, _)| t as usize).max() {
            if max >= self.n_features {
                return Err(ModelError::DimensionMismatch {
                    expected: self.n_features,
                    got: max + 1,
                });
            }
        }
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    let value = row
                        .binary_search_by_key(feature, |&(t, _)| t)
                        .map(|pos| row[pos].1)
                        .unwrap_or(0.0);
                    at = if value <= *threshold { *left } else { *right };
                }
                TreeNode::Leaf { class, class_counts } => {
                    let total: u32 = class_counts.iter().sum();
                    let scores = class_counts
                        .iter()
                        .map(|&n| f64::from(n) / f64::from(total))
                        .collect();
                    return Ok(Prediction {
                        class_index: *class,
                        scores,
                    });
                }
            }
        }
    }
}

/// Gini impurity 1 − Σ (n_c/n)² of a count vector.
fn gini(counts: &[u32], total: f64) -> f64 {
    1.0 - counts
        .iter()
        .map(|&n| {
            let p = f64::from(n) / total;
            p * p
        })
        .sum::<f64>()
}

fn leaf_from_counts(counts: Vec<u32>) -> TreeNode {
    let scores: Vec<f64> = counts.iter().map(|&n| f64::from(n)).collect();
    TreeNode::Leaf {
        class: argmax_tie_lowest(&scores),
        class_counts: counts,
    }
}

struct BuildTask {
    indices: Vec<usize>,
    depth: usize,
    slot: usize,
}

/// Grows the tree on integer class labels in `0..n_classes`.
pub fn train_tree(
    x: &DocTermMatrix,
    y: &[usize],
    n_classes: usize,
    cfg: &TreeConfig,
) -> Result<DecisionTreeModel, ModelError> {
    if x.n_docs() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if x.n_docs() != y.len() {
        return Err(ModelError::LengthMismatch {
            labels: y.len(),
            docs: x.n_docs(),
        });
    }
    if n_classes < 2 {
        return Err(ModelError::TooFewClasses(n_classes));
    }
    if let Some(&bad) = y.iter().find(|&&c| c >= n_classes) {
        return Err(ModelError::InvalidParam {
            name: "labels",
            reason: format!("class index {bad} out of range for {n_classes} classes"),
        });
    }

    // Dense column access makes the per-feature sweeps simple; acceptable
    // for the corpus sizes this trainer targets.
    let dense = x.to_dense();
    let v = x.n_features();

    let mut nodes = vec![leaf_from_counts(vec![0; n_classes])];
    let mut depth_seen = 0;
    // Explicit work stack instead of recursion: tree depth is unbounded.
    let mut stack = vec![BuildTask {
        indices: (0..x.n_docs()).collect(),
        depth: 0,
        slot: 0,
    }];

    while let Some(task) = stack.pop() {
        depth_seen = depth_seen.max(task.depth);
        let mut counts = vec![0u32; n_classes];
        for &i in &task.indices {
            counts[y[i]] += 1;
        }
        let total = task.indices.len() as f64;
        let node_gini = gini(&counts, total);
        let depth_capped = cfg.max_depth.is_some_and(|cap| task.depth >= cap);
        if node_gini == 0.0 || depth_capped {
            nodes[task.slot] = leaf_from_counts(counts);
            continue;
        }

        // Best split so far: (weighted child impurity, feature,
        // threshold). Strict improvement keeps the earliest candidate.
        let mut best: Option<(f64, u32, f64)> = None;
        let mut order: Vec<usize> = Vec::with_capacity(task.indices.len());
        // `feature` selects a column of the row-major matrix, not an element.
        #[allow(clippy::needless_range_loop)]
        for feature in 0..v {
            order.clone_from(&task.indices);
            order.sort_by(|&a, &b| dense[a][feature].total_cmp(&dense[b][feature]));
            let mut left = vec![0u32; n_classes];
            let mut n_left = 0f64;
            for pair in 0..order.len() - 1 {
                left[y[order[pair]]] += 1;
                n_left += 1.0;
                let (lo, hi) = (dense[order[pair]][feature], dense[order[pair + 1]][feature]);
                if lo == hi {
                    continue;
                }
                let threshold = 0.5 * (lo + hi);
                let right: Vec<u32> = counts
                    .iter()
                    .zip(&left)
                    .map(|(&all, &l)| all - l)
                    .collect();
                let n_right = total - n_left;
                let weighted =
                    (n_left * gini(&left, n_left) + n_right * gini(&right, n_right)) / total;
                if best.is_none_or(|(w, _, _)| weighted < w) {
                    best = Some((weighted, feature as u32, threshold));
                }
            }
        }

        match best {
            Some((weighted, feature, threshold)) if weighted < node_gini => {
                let (left_docs, right_docs): (Vec<usize>, Vec<usize>) = task
                    .indices
                    .iter()
                    .partition(|&&i| dense[i][feature as usize] <= threshold);
                let left_slot = nodes.len();
                nodes.push(leaf_from_counts(vec![0; n_classes]));
                let right_slot = nodes.len();
                nodes.push(leaf_from_counts(vec![0; n_classes]));
                nodes[task.slot] = TreeNode::Internal {
                    feature,
                    threshold,
                    left: left_slot,
                    right: right_slot,
                };
                stack.push(BuildTask {
                    indices: right_docs,
                    depth: task.depth + 1,
                    slot: right_slot,
                });
                stack.push(BuildTask {
                    indices: left_docs,
                    depth: task.depth + 1,
                    slot: left_slot,
                });
            }
            // No split reduces impurity: conflicting duplicate rows.
            _ => nodes[task.slot] = leaf_from_counts(counts),
        }
    }

    Ok(DecisionTreeModel {
        nodes,
        n_features: v,
        n_classes,
        depth: depth_seen,
    })
}
