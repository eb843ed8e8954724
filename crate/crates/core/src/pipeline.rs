//! End-to-end training and prediction: one artifact carries the cleaning
//! configuration, vocabulary, feature weighting, and model parameters so
//! that prediction replays the exact training-time chain.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::corpus::{CorpusError, LabelSchema, LabeledCorpus, SchemaKind};
use crate::eval::{
    binary_metrics, micro_macro, stratified_folds, ConfusionMatrix, CvReport, EvalError,
    FoldMetrics,
};
use crate::features::{
    apply_tfidf, count_vectorize, fit_tfidf, DocTermMatrix, FeatureError, TfidfModel, Vocabulary,
    Weighting,
};
use crate::models::{
    train_ovo, train_ovr, BinaryModel, BinaryTrainer, LogRegConfig, ModelError, ModelFamily,
    OvoModel, OvrModel, Prediction, SvmConfig, TreeConfig,
};
use crate::ngram::{self, NgramError, ThresholdModel};
use crate::preprocess::{build_vocabulary, tokenize, CleanConfig, Cleaner, PreprocessError, TokenStream};

/// Version written into every saved artifact; loading rejects other values.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Preprocess(#[from] PreprocessError),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Ngram(#[from] NgramError),
    #[error("unsupported schema version {found} (this build reads version {expected})")]
    SchemaVersion { found: u32, expected: u32 },
    #[error("invalid pipeline parameter: {0}")]
    InvalidParam(String),
    #[error("i/o failure")]
    Io(#[from] std::io::Error),
    #[error("malformed artifact")]
    Json(#[from] serde_json::Error),
}

/// Shape of the classification task an artifact solves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    Binary,
    Multiclass,
}

/// How a multiclass task decomposes into binary members.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MulticlassStrategy {
    #[default]
    Ovr,
    Ovo,
}

/// Training-time choices. The strategy only matters for multiclass
/// corpora; `c` is ignored by trees.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainOptions {
    pub family: ModelFamily,
    pub weighting: Weighting,
    pub c: f64,
    pub strategy: MulticlassStrategy,
    /// Weight multipliers for (positive, negative) logistic examples.
    pub class_weights: (f64, f64),
    pub tree_max_depth: Option<usize>,
}

impl Default for TrainOptions {
    fn default() -> Self {
        TrainOptions {
            family: ModelFamily::Logreg,
            weighting: Weighting::Count,
            c: 1.0,
            strategy: MulticlassStrategy::default(),
            class_weights: (1.0, 1.0),
            tree_max_depth: None,
        }
    }
}

impl TrainOptions {
    fn trainer(&self) -> BinaryTrainer {
        match self.family {
            ModelFamily::Logreg => BinaryTrainer::Logreg(LogRegConfig {
                c: self.c,
                class_weights: self.class_weights,
                ..LogRegConfig::default()
            }),
            ModelFamily::Svm => BinaryTrainer::Svm(SvmConfig {
                c: self.c,
                ..SvmConfig::default()
            }),
            ModelFamily::Tree => BinaryTrainer::Tree(TreeConfig {
                max_depth: self.tree_max_depth,
            }),
        }
    }
}

/// The trained model parameters, tagged by decomposition strategy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "strategy", rename_all = "snake_case")]
pub enum ModelParams {
    Single { model: BinaryModel },
    Ovr { model: OvrModel },
    Ovo { model: OvoModel },
}

impl ModelParams {
    fn predict(&self, row: &[(u32, f64)]) -> Result<Prediction, ModelError> {
        match self {
            ModelParams::Single { model } => model.predict(row),
            ModelParams::Ovr { model } => model.predict(row),
            ModelParams::Ovo { model } => model.predict(row),
        }
    }

    fn family(&self) -> Option<ModelFamily> {
        let of_binary = |m: &BinaryModel| match m {
            BinaryModel::Logreg(_) => ModelFamily::Logreg,
            BinaryModel::Svm(_) => ModelFamily::Svm,
            BinaryModel::Tree(_) => ModelFamily::Tree,
        };
        match self {
            ModelParams::Single { model } => Some(of_binary(model)),
            ModelParams::Ovr { model } => model.members().first().map(of_binary),
            ModelParams::Ovo { model } => model.members().first().map(|m| of_binary(&m.model)),
        }
    }
}

/// A complete trained artifact. Serializes to versioned JSON with
/// deterministic field order; reals keep full round-trip precision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPipeline {
    schema_version: u32,
    task: Task,
    family: ModelFamily,
    label_schema: LabelSchema,
    clean_config: CleanConfig,
    vocabulary: Vocabulary,
    feature_weighting: Weighting,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    idf: Option<Vec<f64>>,
    parameters: ModelParams,
}

/// Cleans, tokenizes, and vectorizes `texts` against a fixed vocabulary,
/// applying the optional idf reweighting.
fn featurize(
    cleaner: &Cleaner,
    texts: &[&str],
    vocab: &Vocabulary,
    idf: Option<&[f64]>,
) -> Result<DocTermMatrix, PipelineError> {
    let streams: Vec<TokenStream> = texts.iter().map(|t| tokenize(&cleaner.clean(t))).collect();
    let counts = count_vectorize(&streams, vocab).matrix;
    match idf {
        None => Ok(counts),
        Some(idf) => {
            let model = TfidfModel::from_parts(idf.to_vec(), 0);
            Ok(apply_tfidf(&model, &counts)?)
        }
    }
}

/// Trains the model parameters for one already-featurized corpus.
fn fit_params(
    x: &DocTermMatrix,
    labels: &[usize],
    schema: &LabelSchema,
    options: &TrainOptions,
) -> Result<(Task, ModelParams), PipelineError> {
    let trainer = options.trainer();
    match schema.kind {
        SchemaKind::Binary => {
            let y: Vec<bool> = labels.iter().map(|&l| l == 0).collect();
            let model = trainer.train(x, &y)?;
            Ok((Task::Binary, ModelParams::Single { model }))
        }
        SchemaKind::Multiclass => {
            let params = match options.strategy {
                MulticlassStrategy::Ovr => ModelParams::Ovr {
                    model: train_ovr(x, labels, &schema.classes, &trainer)?,
                },
                MulticlassStrategy::Ovo => ModelParams::Ovo {
                    model: train_ovo(x, labels, &schema.classes, &trainer)?,
                },
            };
            Ok((Task::Multiclass, params))
        }
    }
}

impl TrainedPipeline {
    /// Trains the full chain on a labeled corpus: clean, tokenize, build
    /// the vocabulary, vectorize, optionally fit tfidf, and fit the model.
    pub fn train(
        corpus: &LabeledCorpus,
        clean_config: &CleanConfig,
        options: &TrainOptions,
    ) -> Result<TrainedPipeline, PipelineError> {
        if options.c <= 0.0 || !options.c.is_finite() {
            return Err(PipelineError::InvalidParam(format!(
                "C must be positive and finite, got {}",
                options.c
            )));
        }
        if options.family == ModelFamily::Tree && options.weighting == Weighting::Tfidf {
            log::warn!("training a tree on tfidf features; counts are the usual pairing");
        }
        let cleaner = Cleaner::new(clean_config)?;
        let streams: Vec<TokenStream> = corpus
            .reports()
            .iter()
            .map(|r| tokenize(&cleaner.clean(&r.text)))
            .collect();
        let vocabulary = build_vocabulary(&streams)?;
        let counts = count_vectorize(&streams, &vocabulary).matrix;
        let (x, idf) = match options.weighting {
            Weighting::Count => (counts, None),
            Weighting::Tfidf => {
                let tfidf = fit_tfidf(&counts)?;
                let x = apply_tfidf(&tfidf, &counts)?;
                (x, Some(tfidf.idf().to_vec()))
            }
        };
        let labels = corpus.label_indices()?;
        let (task, parameters) = fit_params(&x, &labels, corpus.schema(), options)?;
        Ok(TrainedPipeline {
            schema_version: SCHEMA_VERSION,
            task,
            family: options.family,
            label_schema: corpus.schema().clone(),
            clean_config: clean_config.clone(),
            vocabulary,
            feature_weighting: options.weighting,
            idf,
            parameters,
        })
    }

    pub fn task(&self) -> Task {
        self.task
    }

    pub fn family(&self) -> ModelFamily {
        self.family
    }

    pub fn classes(&self) -> &[String] {
        &self.label_schema.classes
    }

    pub fn label_schema(&self) -> &LabelSchema {
        &self.label_schema
    }

    pub fn clean_config(&self) -> &CleanConfig {
        &self.clean_config
    }

    pub fn vocabulary(&self) -> &Vocabulary {
        &self.vocabulary
    }

    pub fn weighting(&self) -> Weighting {
        self.feature_weighting
    }

    pub fn parameters(&self) -> &ModelParams {
        &self.parameters
    }

    /// Per-feature coefficients when the underlying binary model is
    /// linear; None for trees and multiclass decompositions.
    pub fn coefficients(&self) -> Option<&[f64]> {
        match &self.parameters {
            ModelParams::Single { model } => model.coefficients(),
            _ => None,
        }
    }

    /// Replays cleaning, tokenization, and featurization on raw texts and
    /// predicts each one. Output order follows input order.
    pub fn predict_texts(&self, texts: &[&str]) -> Result<Vec<Prediction>, PipelineError> {
        let cleaner = Cleaner::new(&self.clean_config)?;
        let x = featurize(&cleaner, texts, &self.vocabulary, self.idf.as_deref())?;
        x.rows()
            .map(|row| self.parameters.predict(row).map_err(PipelineError::from))
            .collect()
    }

    /// Single-text convenience wrapper around [`predict_texts`].
    ///
    /// [`predict_texts`]: TrainedPipeline::predict_texts
    pub fn predict_text(&self, text: &str) -> Result<Prediction, PipelineError> {
        Ok(self
            .predict_texts(&[text])?
            .pop()
            .expect("one prediction per input"))
    }

    /// Class name for a prediction's class index.
    pub fn class_name(&self, class_index: usize) -> Option<&str> {
        self.label_schema.classes.get(class_index).map(String::as_str)
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<TrainedPipeline, PipelineError> {
        check_version(json)?;
        let pipeline: TrainedPipeline = serde_json::from_str(json)?;
        pipeline.validate()?;
        Ok(pipeline)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<TrainedPipeline, PipelineError> {
        let json = std::fs::read_to_string(path)?;
        TrainedPipeline::from_json(&json)
    }

    /// Structural checks applied when loading foreign artifacts.
    fn validate(&self) -> Result<(), PipelineError> {
        self.label_schema.validate()?;
        if let Some(idf) = &self.idf {
            if idf.len() != self.vocabulary.len() {
                return Err(PipelineError::InvalidParam(format!(
                    "idf length {} does not match vocabulary size {}",
                    idf.len(),
                    self.vocabulary.len()
                )));
            }
        }
        if self.feature_weighting == Weighting::Tfidf && self.idf.is_none() {
            return Err(PipelineError::InvalidParam(
                "tfidf weighting requires a stored idf vector".into(),
            ));
        }
        let stored = self.parameters.family();
        if stored.is_some_and(|f| f != self.family) {
            return Err(PipelineError::InvalidParam(format!(
                "family field says {} but the parameters hold a different family",
                self.family
            )));
        }
        match (self.task, &self.parameters) {
            (Task::Binary, ModelParams::Single { .. }) => Ok(()),
            (Task::Multiclass, ModelParams::Ovr { .. } | ModelParams::Ovo { .. }) => Ok(()),
            _ => Err(PipelineError::InvalidParam(
                "task and parameter strategy disagree".into(),
            )),
        }
    }
}

/// Stratified k-fold cross-validation of the whole chain. The vocabulary
/// and idf are refit inside every fold so held-out reports never leak into
/// featurization. Fold metrics are the positive-class precision/recall for
/// binary tasks and the macro averages for multiclass.
pub fn cross_validate(
    corpus: &LabeledCorpus,
    clean_config: &CleanConfig,
    options: &TrainOptions,
    k: usize,
    seed: u64,
) -> Result<CvReport, PipelineError> {
    let labels = corpus.label_indices()?;
    let folds = stratified_folds(&labels, k, seed)?;
    let cleaner = Cleaner::new(clean_config)?;
    let streams: Vec<TokenStream> = corpus
        .reports()
        .iter()
        .map(|r| tokenize(&cleaner.clean(&r.text)))
        .collect();
    let schema = corpus.schema();
    let mut fold_metrics = Vec::with_capacity(folds.len());
    for (fold_ix, test_ix) in folds.iter().enumerate() {
        let mut held_out = vec![false; labels.len()];
        for &i in test_ix {
            held_out[i] = true;
        }
        let train_ix: Vec<usize> = (0..labels.len()).filter(|&i| !held_out[i]).collect();
        let gather = |ix: &[usize]| -> (Vec<TokenStream>, Vec<usize>) {
            (
                ix.iter().map(|&i| streams[i].clone()).collect(),
                ix.iter().map(|&i| labels[i]).collect(),
            )
        };
        let (train_streams, train_labels) = gather(&train_ix);
        let (test_streams, test_labels) = gather(test_ix);

        let vocab = build_vocabulary(&train_streams)?;
        let train_counts = count_vectorize(&train_streams, &vocab).matrix;
        let test_counts = count_vectorize(&test_streams, &vocab).matrix;
        let (x_train, x_test) = match options.weighting {
            Weighting::Count => (train_counts, test_counts),
            Weighting::Tfidf => {
                let tfidf = fit_tfidf(&train_counts)?;
                (
                    apply_tfidf(&tfidf, &train_counts)?,
                    apply_tfidf(&tfidf, &test_counts)?,
                )
            }
        };
        let (_, params) = fit_params(&x_train, &train_labels, schema, options)?;
        let preds: Vec<usize> = x_test
            .rows()
            .map(|row| params.predict(row).map(|p| p.class_index))
            .collect::<Result<_, _>>()?;
        let cm = ConfusionMatrix::from_indices(&test_labels, &preds, schema.classes.clone())?;
        let (precision, recall) = match schema.kind {
            SchemaKind::Binary => {
                let prf = binary_metrics(&cm)?;
                (prf.precision, prf.recall)
            }
            SchemaKind::Multiclass => {
                let report = micro_macro(&cm);
                (report.macro_avg.precision, report.macro_avg.recall)
            }
        };
        fold_metrics.push(FoldMetrics {
            fold: fold_ix,
            precision,
            recall,
        });
    }
    Ok(CvReport::from_folds(fold_metrics)?)
}

/// A fitted n-gram baseline plus the label names and cleaning
/// configuration needed to replay it on raw text.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselinePipeline {
    schema_version: u32,
    label_schema: LabelSchema,
    clean_config: CleanConfig,
    #[serde(flatten)]
    model: ThresholdModel,
}

impl BaselinePipeline {
    /// Fits the baseline on a binary corpus: positive-class reports supply
    /// the n-gram sets, both classes supply the fraction statistics.
    pub fn fit(
        corpus: &LabeledCorpus,
        clean_config: &CleanConfig,
        options: &ngram::FitOptions,
    ) -> Result<BaselinePipeline, PipelineError> {
        if corpus.schema().kind != SchemaKind::Binary {
            return Err(PipelineError::InvalidParam(
                "the n-gram baseline needs a binary-labeled corpus".into(),
            ));
        }
        let cleaner = Cleaner::new(clean_config)?;
        let labels = corpus.label_indices()?;
        let mut positive = Vec::new();
        let mut negative = Vec::new();
        for (report, &label) in corpus.reports().iter().zip(&labels) {
            let stream = tokenize(&cleaner.clean(&report.text));
            if label == 0 {
                positive.push(stream);
            } else {
                negative.push(stream);
            }
        }
        let model = ngram::fit(&positive, &negative, options)?;
        Ok(BaselinePipeline {
            schema_version: SCHEMA_VERSION,
            label_schema: corpus.schema().clone(),
            clean_config: clean_config.clone(),
            model,
        })
    }

    pub fn model(&self) -> &ThresholdModel {
        &self.model
    }

    pub fn label_schema(&self) -> &LabelSchema {
        &self.label_schema
    }

    /// Class name for a positive/negative call.
    pub fn class_name(&self, positive: bool) -> &str {
        &self.label_schema.classes[usize::from(!positive)]
    }

    pub fn clean_config(&self) -> &CleanConfig {
        &self.clean_config
    }

    /// Cleans and tokenizes one raw text, returning the positive/negative
    /// call and the measured fraction.
    pub fn classify_text(&self, text: &str) -> Result<(bool, f64), PipelineError> {
        let cleaner = Cleaner::new(&self.clean_config)?;
        let stream = tokenize(&cleaner.clean(text));
        let fraction = self.model.fraction(&stream);
        Ok((fraction > self.model.threshold, fraction))
    }

    pub fn to_json(&self) -> Result<String, PipelineError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(json: &str) -> Result<BaselinePipeline, PipelineError> {
        check_version(json)?;
        Ok(serde_json::from_str(json)?)
    }

    pub fn save(&self, path: &Path) -> Result<(), PipelineError> {
        let mut out = BufWriter::new(File::create(path)?);
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<BaselinePipeline, PipelineError> {
        let json = std::fs::read_to_string(path)?;
        BaselinePipeline::from_json(&json)
    }
}

/// Reads just the version field so future formats fail with a clear error
/// instead of a deserialization failure.
fn check_version(json: &str) -> Result<(), PipelineError> {
    #[derive(Deserialize)]
    struct Probe {
        schema_version: u32,
    }
    let probe: Probe = serde_json::from_str(json)?;
    if probe.schema_version != SCHEMA_VERSION {
        return Err(PipelineError::SchemaVersion {
            found: probe.schema_version,
            expected: SCHEMA_VERSION,
        });
    }
    Ok(())
}

/// Derives a stage-specific seed from the run seed, so separate stages
/// (splitting, folding, synthesis) draw from independent streams while one
/// `--seed` reproduces the whole run. FNV-1a over the label and the seed.
pub fn derive_seed(seed: u64, label: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes().chain(seed.to_le_bytes()) {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// Ordered map of class name to prediction score, for reporting.
pub fn score_map(classes: &[String], prediction: &Prediction) -> BTreeMap<String, f64> {
    classes
        .iter()
        .cloned()
        .zip(prediction.scores.iter().copied())
        .collect()
}
