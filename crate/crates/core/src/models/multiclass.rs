//! One-vs-rest and one-vs-one multiclass wrappers.
//!
//! Both schemes wrap any binary family. Members are independent, so they
//! train in parallel; member order is fixed by class index, making the
//! assembled model independent of scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{argmax_tie_lowest, BinaryModel, BinaryTrainer, ModelError, Prediction};
use crate::features::DocTermMatrix;

/// One binary member per class, trained on that class against all others.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvrModel {
    classes: Vec<String>,
    members: Vec<BinaryModel>,
}

/// One member per unordered class pair, trained only on that pair's
/// documents with `positive` as the positive class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoMember {
    pub positive: usize,
    pub negative: usize,
    pub model: BinaryModel,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvoModel {
    classes: Vec<String>,
    members: Vec<OvoMember>,
}

fn check_multiclass_inputs(
    x: &DocTermMatrix,
    labels: &[usize],
    classes: &[String],
) -> Result<(), ModelError> {
    if classes.len() < 2 {
        return Err(ModelError::TooFewClasses(classes.len()));
    }
    if x.n_docs() != labels.len() {
        return Err(ModelError::LengthMismatch {
            labels: labels.len(),
            docs: x.n_docs(),
        });
    }
    if x.n_docs() == 0 {
        return Err(ModelError::EmptyInput);
    }
    if let Some(&bad) = labels.iter().find(|&&c| c >= classes.len()) {
        return Err(ModelError::InvalidParam {
            name: "labels",
            reason: format!("class index {bad} out of range for {} classes", classes.len()),
        });
    }
    for (idx, class) in classes.iter().enumerate() {
        if !labels.contains(&idx) {
            return Err(ModelError::EmptyClass {
                class: class.clone(),
            });
        }
    }
    Ok(())
}

/// Trains k members, one per class, each on the full matrix with a
/// class-vs-rest relabeling.
pub fn train_ovr(
    x: &DocTermMatrix,
    labels: &[usize],
    classes: &[String],
    trainer: &BinaryTrainer,
) -> Result<OvrModel, ModelError> {
    check_multiclass_inputs(x, labels, classes)?;
    let members = (0..classes.len())
        .into_par_iter()
        .map(|class| {
            let y: Vec<bool> = labels.iter().map(|&l| l == class).collect();
            trainer.train(x, &y)
        })
        .collect::<Result<Vec<_>, _>>()?;
    Ok(OvrModel {
        classes: classes.to_vec(),
        members,
    })
}

impl OvrModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn members(&self) -> &[BinaryModel] {
        &self.members
    }

    /// Per-class scores are the members' ranking scores; the label is the
    /// argmax with ties resolved to the lowest class index.
    pub fn predict(&self, row: &[(u32, f64)]) -> Result<Prediction, ModelError> {
        let scores = self
            .members
            .iter()
            .map(|m| m.ovr_score(row))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(Prediction {
            class_index: argmax_tie_lowest(&scores),
            scores,
        })
    }
}

/// Trains k(k−1)/2 members, one per class pair (i, j) with i < j, each on
/// the submatrix of documents labeled i or j.
pub fn train_ovo(
    x: &DocTermMatrix,
    labels: &[usize],
    classes: &[String],
    trainer: &BinaryTrainer,
) -> Result<OvoModel, ModelError> {
    check_multiclass_inputs(x, labels, classes)?;
    let k = classes.len();
    let pairs: Vec<(usize, usize)> = (0..k)
        .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
        .collect();
    let members = pairs
        .into_par_iter()
        .map(|(i, j)| {
            let mut rows = Vec::new();
            let mut y = Vec::new();
            for (row, &label) in x.rows().zip(labels) {
                if label == i || label == j {
                    rows.push(row.to_vec());
                    y.push(label == i);
                }
            }
            let sub = DocTermMatrix::from_rows(x.n_features(), x.weighting(), rows)
                .expect("rows of a valid matrix stay valid");
            let model = trainer.train(&sub, &y)?;
            Ok(OvoMember {
                positive: i,
                negative: j,
                model,
            })
        })
        .collect::<Result<Vec<_>, ModelError>>()?;
    Ok(OvoModel {
        classes: classes.to_vec(),
        members,
    })
}

impl OvoModel {
    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn members(&self) -> &[OvoMember] {
        &self.members
    }

    /// Majority vote over the members. Vote ties are resolved by summed
    /// signed decisions (each member adds its decision to its positive
    /// class and subtracts it from its negative class), then by lowest
    /// class index. Scores are vote fractions, which sum to 1.
    pub fn predict(&self, row: &[(u32, f64)]) -> Result<Prediction, ModelError> {
        let k = self.classes.len();
        let mut votes = vec![0usize; k];
        let mut sums = vec![0.0f64; k];
        for member in &self.members {
            let d = member.model.signed_decision(row)?;
            if d >= 0.0 {
                votes[member.positive] += 1;
            } else {
                votes[member.negative] += 1;
            }
            sums[member.positive] += d;
            sums[member.negative] -= d;
        }
        let top = *votes.iter().max().expect("at least two classes");
        let mut winner = None;
        for class in 0..k {
            if votes[class] == top
                && winner.is_none_or(|(_, best_sum)| sums[class] > best_sum)
            {
                winner = Some((class, sums[class]));
            }
        }
        let (class_index, _) = winner.expect("vote counts are non-empty");
        let scores = votes
            .iter()
            .map(|&n| n as f64 / self.members.len() as f64)
            .collect();
        Ok(Prediction {
            class_index,
            scores,
        })
    }
}
