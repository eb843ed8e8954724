//! Sparse document-term features: token counts and TFIDF weighting.

use std::collections::{BTreeMap, HashMap};
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::preprocess::TokenStream;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("expected {expected:?}-weighted matrix, got {got:?}")]
    WrongWeighting { expected: Weighting, got: Weighting },
    #[error("matrix has {got} features, expected {expected}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("vocabulary must be non-empty, lexicographically sorted, and duplicate-free")]
    InvalidVocabulary,
    #[error("count values must be positive integers representable in 32 bits, got {0}")]
    InvalidCount(f64),
    #[error("feature value at doc {doc} is not finite")]
    NonFinite { doc: usize },
    #[error("row {doc} has out-of-range or unsorted feature indices")]
    BadRow { doc: usize },
}

/// Token-to-index mapping. Indices cover `0..len()` in lexicographic token
/// order, so the same token set always produces the same indexing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct Vocabulary {
    tokens: Vec<String>,
    index: HashMap<String, u32>,
}

impl Vocabulary {
    /// Builds from tokens that are already sorted and deduplicated
    /// (as produced by a `BTreeSet`).
    pub(crate) fn from_sorted_unique(tokens: Vec<String>) -> Vocabulary {
        debug_assert!(tokens.windows(2).all(|w| w[0] < w[1]));
        debug_assert!(!tokens.is_empty());
        let index = tokens
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i as u32))
            .collect();
        Vocabulary { tokens, index }
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }

    pub fn tokens(&self) -> &[String] {
        &self.tokens
    }

    pub fn index_of(&self, token: &str) -> Option<u32> {
        self.index.get(token).copied()
    }

    pub fn token(&self, index: u32) -> Option<&str> {
        self.tokens.get(index as usize).map(String::as_str)
    }
}

impl TryFrom<Vec<String>> for Vocabulary {
    type Error = FeatureError;

    fn try_from(tokens: Vec<String>) -> Result<Self, Self::Error> {
        let ordered = !tokens.is_empty()
            && !tokens[0].is_empty()
            && tokens.windows(2).all(|w| w[0] < w[1]);
        if !ordered {
            return Err(FeatureError::InvalidVocabulary);
        }
        Ok(Vocabulary::from_sorted_unique(tokens))
    }
}

impl From<Vocabulary> for Vec<String> {
    fn from(v: Vocabulary) -> Vec<String> {
        v.tokens
    }
}

/// How matrix values are weighted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Weighting {
    Count,
    Tfidf,
}

/// Sparse documents-by-terms matrix. Rows hold `(feature, value)` pairs with
/// strictly increasing feature indices; zeros are never stored. Count-weighted
/// values are positive integers that fit in 32 bits (held in `f64`, which
/// represents them exactly).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DocTermMatrix {
    n_features: usize,
    weighting: Weighting,
    rows: Vec<Vec<(u32, f64)>>,
}

impl DocTermMatrix {
    /// Validates and wraps pre-built sparse rows.
    pub fn from_rows(
        n_features: usize,
        weighting: Weighting,
        rows: Vec<Vec<(u32, f64)>>,
    ) -> Result<DocTermMatrix, FeatureError> {
        for (doc, row) in rows.iter().enumerate() {
            let sorted = row.windows(2).all(|w| w[0].0 < w[1].0);
            let in_range = row.last().is_none_or(|&(i, _)| (i as usize) < n_features);
            if !sorted || !in_range {
                return Err(FeatureError::BadRow { doc });
            }
            for &(_, v) in row {
                if !v.is_finite() {
                    return Err(FeatureError::NonFinite { doc });
                }
                if weighting == Weighting::Count
                    && (v < 1.0 || v.fract() != 0.0 || v > u32::MAX as f64)
                {
                    return Err(FeatureError::InvalidCount(v));
                }
            }
        }
        Ok(DocTermMatrix {
            n_features,
            weighting,
            rows,
        })
    }

    pub fn n_docs(&self) -> usize {
        self.rows.len()
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn weighting(&self) -> Weighting {
        self.weighting
    }

    pub fn row(&self, doc: usize) -> &[(u32, f64)] {
        &self.rows[doc]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[(u32, f64)]> {
        self.rows.iter().map(Vec::as_slice)
    }

    pub fn nnz(&self) -> usize {
        self.rows.iter().map(Vec::len).sum()
    }

    /// Materializes the matrix densely; intended for small matrices and
    /// oracle comparisons.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut dense = vec![vec![0.0; self.n_features]; self.rows.len()];
        for (doc, row) in self.rows.iter().enumerate() {
            for &(feature, value) in row {
                dense[doc][feature as usize] = value;
            }
        }
        dense
    }

    /// Writes `doc feature value` triples, one per line, preceded by a `#`
    /// header with the dimensions. Count values print as integers.
    pub fn write_coo<W: Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(
            out,
            "# docs={} features={} nnz={} weighting={}",
            self.rows.len(),
            self.n_features,
            self.nnz(),
            match self.weighting {
                Weighting::Count => "count",
                Weighting::Tfidf => "tfidf",
            }
        )?;
        for (doc, row) in self.rows.iter().enumerate() {
            for &(feature, value) in row {
                match self.weighting {
                    Weighting::Count => writeln!(out, "{doc} {feature} {value:.0}")?,
                    Weighting::Tfidf => writeln!(out, "{doc} {feature} {value}")?,
                }
            }
        }
        Ok(())
    }
}

/// A count matrix plus how many tokens were dropped because they are not in
/// the vocabulary.
#[derive(Debug, Clone)]
pub struct VectorizeResult {
    pub matrix: DocTermMatrix,
    pub oov_dropped: u64,
}

/// Counts vocabulary tokens per document. Out-of-vocabulary tokens are
/// dropped silently apart from the returned tally; row order follows
/// `streams`.
pub fn count_vectorize(streams: &[TokenStream], vocab: &Vocabulary) -> VectorizeResult {
    let mut oov_dropped = 0u64;
    let rows = streams
        .iter()
        .map(|stream| {
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for token in stream.iter() {
                match vocab.index_of(token) {
                    Some(ix) => *counts.entry(ix).or_insert(0) += 1,
                    None => oov_dropped += 1,
                }
            }
            counts.into_iter().map(|(i, c)| (i, c as f64)).collect()
        })
        .collect();
    let matrix = DocTermMatrix {
        n_features: vocab.len(),
        weighting: Weighting::Count,
        rows,
    };
    VectorizeResult {
        matrix,
        oov_dropped,
    }
}

/// Per-term inverse document frequencies learned from a count matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    idf: Vec<f64>,
    document_count: usize,
}

impl TfidfModel {
    pub fn idf(&self) -> &[f64] {
        &self.idf
    }

    pub fn document_count(&self) -> usize {
        self.document_count
    }

    /// Rebuilds a model from stored weights, e.g. when loading a saved
    /// pipeline.
    pub fn from_parts(idf: Vec<f64>, document_count: usize) -> TfidfModel {
        TfidfModel {
            idf,
            document_count,
        }
    }
}

/// Fits smoothed idf weights `ln((1 + N) / (1 + df)) + 1` from a count
/// matrix. Terms absent from every document get the maximum weight
/// `ln(1 + N) + 1` rather than a divide-by-zero.
pub fn fit_tfidf(counts: &DocTermMatrix) -> Result<TfidfModel, FeatureError> {
    expect_weighting(counts, Weighting::Count)?;
    let n = counts.n_docs();
    let mut df = vec![0u64; counts.n_features()];
    for row in counts.rows() {
        for &(feature, _) in row {
            df[feature as usize] += 1;
        }
    }
    let idf = df
        .iter()
        .map(|&d| ((1 + n) as f64 / (1 + d) as f64).ln() + 1.0)
        .collect();
    Ok(TfidfModel {
        idf,
        document_count: n,
    })
}

/// Reweights counts by idf and L2-normalizes each row. All-zero rows stay
/// zero; the sparsity pattern is unchanged because idf weights are at least 1.
pub fn apply_tfidf(
    model: &TfidfModel,
    counts: &DocTermMatrix,
) -> Result<DocTermMatrix, FeatureError> {
    expect_weighting(counts, Weighting::Count)?;
    if counts.n_features() != model.idf.len() {
        return Err(FeatureError::DimensionMismatch {
            expected: model.idf.len(),
            got: counts.n_features(),
        });
    }
    let rows = counts
        .rows()
        .map(|row| {
            let mut weighted: Vec<(u32, f64)> = row
                .iter()
                .map(|&(f, c)| (f, c * model.idf[f as usize]))
                .collect();
            let norm = weighted.iter().map(|&(_, v)| v * v).sum::<f64>().sqrt();
            if norm > 0.0 {
                for (_, v) in &mut weighted {
                    *v /= norm;
                }
            }
            weighted
        })
        .collect();
    Ok(DocTermMatrix {
        n_features: counts.n_features(),
        weighting: Weighting::Tfidf,
        rows,
    })
}

fn expect_weighting(m: &DocTermMatrix, expected: Weighting) -> Result<(), FeatureError> {
    if m.weighting != expected {
        return Err(FeatureError::WrongWeighting {
            expected,
            got: m.weighting,
        });
    }
    Ok(())
}
