//! Text classification for radiology reports.
//!
//! The crate covers the full pipeline: report ingestion and labeled-corpus
//! handling ([`corpus`]), text cleaning and tokenization ([`preprocess`]),
//! sparse count / TFIDF features ([`features`]), logistic regression, linear
//! SVM and decision-tree classifiers with one-vs-rest / one-vs-one multiclass
//! reduction ([`models`]), an n-gram fraction threshold baseline ([`ngram`]),
//! and the evaluation suite: confusion matrices, precision/recall/F1, ROC/AUC,
//! k-fold cross-validation and Welch's t-test ([`eval`]).
//!
//! [`pipeline`] ties these together into a trainable, serializable model that
//! reproduces its training-time preprocessing at inference, and backs the
//! `radclass` command-line tool.

pub mod corpus;
pub mod eval;
pub mod features;
pub mod models;
pub mod ngram;
pub mod pipeline;
pub mod preprocess;
