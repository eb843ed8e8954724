//! N-gram fraction baseline for binary report classification.
//!
//! The baseline is built in four steps: extract bigrams and trigrams from
//! the positive-class reports under configurable word rules, keep only the
//! n-grams containing at least one term from a curated term list, measure
//! the per-report fraction of matching n-grams in both classes, and place
//! a decision threshold in the gap between the class distributions. A
//! report is classified positive when its fraction strictly exceeds the
//! threshold.

use std::collections::{BTreeMap, BTreeSet};
use std::io::BufRead;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::preprocess::TokenStream;

#[derive(Debug, Error)]
pub enum NgramError {
    #[error("no reports to build n-grams from")]
    EmptyCorpus,
    #[error("term list is empty")]
    EmptyTermList,
    #[error("invalid term `{0}`: terms must be lowercase single tokens")]
    InvalidTerm(String),
    #[error("invalid {name}: {reason}")]
    InvalidRule { name: &'static str, reason: String },
    #[error("{class} class has {count} reports; at least 2 are required for stats")]
    TooFewReports { class: &'static str, count: usize },
    #[error(
        "class intervals overlap: positive lower limit {positive_lower} \
         does not exceed negative upper limit {negative_upper}"
    )]
    NoGap {
        positive_lower: f64,
        negative_upper: f64,
    },
    #[error(
        "rounded threshold {threshold} leaves the interval between the class \
         means ({negative_mean}, {positive_mean})"
    )]
    ThresholdOutOfRange {
        threshold: f64,
        negative_mean: f64,
        positive_mean: f64,
    },
    #[error("failed to read term list")]
    Io(#[from] std::io::Error),
}

/// Which n-gram order a fraction or threshold refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NgramOrder {
    Bigram,
    Trigram,
}

impl NgramOrder {
    pub fn window(self) -> usize {
        match self {
            NgramOrder::Bigram => 2,
            NgramOrder::Trigram => 3,
        }
    }
}

impl std::fmt::Display for NgramOrder {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            NgramOrder::Bigram => "bigram",
            NgramOrder::Trigram => "trigram",
        })
    }
}

/// Extraction rules: per-order corpus frequency floors and minimum word
/// lengths, plus a ban on words containing numeric characters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NgramRules {
    pub bigram_min_freq: u32,
    pub bigram_min_word_len: usize,
    pub trigram_min_freq: u32,
    pub trigram_min_word_len: usize,
    pub forbid_numeric_chars: bool,
}

impl Default for NgramRules {
    fn default() -> Self {
        NgramRules {
            bigram_min_freq: 5,
            bigram_min_word_len: 3,
            trigram_min_freq: 1,
            trigram_min_word_len: 2,
            forbid_numeric_chars: true,
        }
    }
}

impl NgramRules {
    pub fn validate(&self) -> Result<(), NgramError> {
        for (name, v) in [
            ("bigram_min_freq", self.bigram_min_freq as usize),
            ("bigram_min_word_len", self.bigram_min_word_len),
            ("trigram_min_freq", self.trigram_min_freq as usize),
            ("trigram_min_word_len", self.trigram_min_word_len),
        ] {
            if v == 0 {
                return Err(NgramError::InvalidRule {
                    name,
                    reason: "must be at least 1".into(),
                });
            }
        }
        Ok(())
    }

    fn min_freq(&self, order: NgramOrder) -> u32 {
        match order {
            NgramOrder::Bigram => self.bigram_min_freq,
            NgramOrder::Trigram => self.trigram_min_freq,
        }
    }

    fn min_word_len(&self, order: NgramOrder) -> usize {
        match order {
            NgramOrder::Bigram => self.bigram_min_word_len,
            NgramOrder::Trigram => self.trigram_min_word_len,
        }
    }

    fn window_ok(&self, words: &[String], order: NgramOrder) -> bool {
        let min_len = self.min_word_len(order);
        words.iter().all(|w| {
            w.chars().count() >= min_len
                && (!self.forbid_numeric_chars || !w.chars().any(char::is_numeric))
        })
    }
}

/// Curated list of class-indicative tokens used to select n-grams.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TermList(BTreeSet<String>);

impl TermList {
    /// Validates and wraps terms: lowercase, non-empty, no whitespace.
    pub fn new<I: IntoIterator<Item = String>>(terms: I) -> Result<TermList, NgramError> {
        let set: BTreeSet<String> = terms.into_iter().collect();
        for t in &set {
            if t.is_empty()
                || t.chars().any(char::is_whitespace)
                || t.chars().any(char::is_uppercase)
            {
                return Err(NgramError::InvalidTerm(t.clone()));
            }
        }
        Ok(TermList(set))
    }

    /// Parses one term per line; blank lines and `#` comments are skipped.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<TermList, NgramError> {
        let mut terms = Vec::new();
        for line in reader.lines() {
            let line = line?;
            let t = line.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            terms.push(t.to_string());
        }
        TermList::new(terms)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, term: &str) -> bool {
        self.0.contains(term)
    }

    pub fn iter(&self) -> impl Iterator<Item = &String> {
        self.0.iter()
    }
}

/// The default chest X-ray term list shipped with the crate (63 terms).
pub fn default_term_list() -> TermList {
    TermList::from_reader(std::io::Cursor::new(include_str!("../assets/cxr_terms.txt")))
        .expect("bundled term list is valid")
}

/// Selected n-grams, stored as space-joined lowercase keys.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct NgramSets {
    pub bigrams: BTreeSet<String>,
    pub trigrams: BTreeSet<String>,
}

impl NgramSets {
    pub fn of(&self, order: NgramOrder) -> &BTreeSet<String> {
        match order {
            NgramOrder::Bigram => &self.bigrams,
            NgramOrder::Trigram => &self.trigrams,
        }
    }
}

/// How per-report fractions count n-grams: every occurrence, or each
/// distinct n-gram once.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FractionMode {
    #[default]
    Occurrences,
    Distinct,
}

/// How the per-class interval limits are derived: mean ± one sample
/// standard deviation, or the observed extremes.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LimitRule {
    #[default]
    MeanStd,
    Observed,
}

/// Fraction distribution summary for one class.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassStats {
    pub mean: f64,
    /// Sample standard deviation (n − 1 denominator).
    pub std: f64,
    pub n: usize,
    pub min: f64,
    pub max: f64,
}

impl ClassStats {
    pub fn from_fractions(fractions: &[f64]) -> Option<ClassStats> {
        if fractions.len() < 2 {
            return None;
        }
        let n = fractions.len() as f64;
        let mean = fractions.iter().sum::<f64>() / n;
        let var = fractions.iter().map(|f| (f - mean).powi(2)).sum::<f64>() / (n - 1.0);
        let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
        for &f in fractions {
            min = min.min(f);
            max = max.max(f);
        }
        Some(ClassStats {
            mean,
            std: var.sqrt(),
            n: fractions.len(),
            min,
            max,
        })
    }
}

/// Per-class fraction statistics for one n-gram order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FractionStats {
    pub positive: ClassStats,
    pub negative: ClassStats,
}

/// Extracts the rule-passing n-grams of one report as space-joined keys,
/// in document order.
pub fn extract_ngrams(
    report: &TokenStream,
    rules: &NgramRules,
    order: NgramOrder,
) -> Vec<String> {
    report
        .tokens()
        .windows(order.window())
        .filter(|w| rules.window_ok(w, order))
        .map(|w| w.join(" "))
        .collect()
}

/// Counts rule-passing n-grams across all reports (n-grams never span
/// report boundaries), then drops entries below the order's corpus
/// frequency floor.
pub fn build_corpus_ngrams(
    reports: &[TokenStream],
    rules: &NgramRules,
    order: NgramOrder,
) -> Result<BTreeMap<String, u32>, NgramError> {
    if reports.is_empty() {
        return Err(NgramError::EmptyCorpus);
    }
    rules.validate()?;
    let mut counts: BTreeMap<String, u32> = BTreeMap::new();
    for report in reports {
        for key in extract_ngrams(report, rules, order) {
            *counts.entry(key).or_insert(0) += 1;
        }
    }
    let floor = rules.min_freq(order);
    counts.retain(|_, c| *c >= floor);
    Ok(counts)
}

/// Keeps exactly the n-grams containing at least one listed term,
/// deduplicated to a set.
pub fn filter_by_terms(ngrams: &BTreeMap<String, u32>, terms: &TermList) -> BTreeSet<String> {
    ngrams
        .keys()
        .filter(|key| key.split(' ').any(|w| terms.contains(w)))
        .cloned()
        .collect()
}

/// Fraction of the report's n-grams that belong to the selected set.
///
/// Reports with fewer tokens than the order have no n-grams and return 0.
/// No word rules apply here: the denominator counts every n-gram present.
pub fn ngram_fraction(
    report: &TokenStream,
    sets: &NgramSets,
    order: NgramOrder,
    mode: FractionMode,
) -> f64 {
    fraction_with_set(report, sets.of(order), order, mode)
}

fn fraction_with_set(
    report: &TokenStream,
    set: &BTreeSet<String>,
    order: NgramOrder,
    mode: FractionMode,
) -> f64 {
    match mode {
        FractionMode::Occurrences => {
            let windows: Vec<&[String]> = report.tokens().windows(order.window()).collect();
            if windows.is_empty() {
                return 0.0;
            }
            let matching = windows
                .iter()
                .filter(|w| set.contains(&w.join(" ")))
                .count();
            matching as f64 / windows.len() as f64
        }
        FractionMode::Distinct => {
            let distinct: BTreeSet<String> = report
                .tokens()
                .windows(order.window())
                .map(|w| w.join(" "))
                .collect();
            if distinct.is_empty() {
                return 0.0;
            }
            let matching = distinct.iter().filter(|k| set.contains(*k)).count();
            matching as f64 / distinct.len() as f64
        }
    }
}

/// Computes per-class fraction statistics; each class needs at least two
/// reports for a sample standard deviation.
pub fn compute_stats(
    positive: &[TokenStream],
    negative: &[TokenStream],
    sets: &NgramSets,
    order: NgramOrder,
    mode: FractionMode,
) -> Result<FractionStats, NgramError> {
    let fractions = |reports: &[TokenStream]| -> Vec<f64> {
        reports
            .iter()
            .map(|r| ngram_fraction(r, sets, order, mode))
            .collect()
    };
    let pos = ClassStats::from_fractions(&fractions(positive)).ok_or(
        NgramError::TooFewReports {
            class: "positive",
            count: positive.len(),
        },
    )?;
    let neg = ClassStats::from_fractions(&fractions(negative)).ok_or(
        NgramError::TooFewReports {
            class: "negative",
            count: negative.len(),
        },
    )?;
    Ok(FractionStats {
        positive: pos,
        negative: neg,
    })
}

/// Decision threshold grid: thresholds land on multiples of 1/20 = 0.05.
/// Snapping divides by this reciprocal, which rounds correctly where
/// multiplying by 0.05 can land one ulp off the grid value.
const THRESHOLD_STEPS_PER_UNIT: f64 = 20.0;

/// Derives the decision threshold from class statistics.
///
/// The class interval limits follow `rule`; the gap between the negative
/// upper limit and positive lower limit must be non-empty. The midpoint of
/// that gap is rounded up to the next grid point. Returns
/// `(midpoint, threshold)`.
pub fn fit_threshold(stats: &FractionStats, rule: LimitRule) -> Result<(f64, f64), NgramError> {
    let (positive_lower, negative_upper) = match rule {
        LimitRule::MeanStd => (
            stats.positive.mean - stats.positive.std,
            stats.negative.mean + stats.negative.std,
        ),
        LimitRule::Observed => (stats.positive.min, stats.negative.max),
    };
    if positive_lower <= negative_upper {
        return Err(NgramError::NoGap {
            positive_lower,
            negative_upper,
        });
    }
    let midpoint = 0.5 * (negative_upper + positive_lower);
    if !(midpoint > negative_upper && midpoint < positive_lower) {
        // Adjacent floating-point limits leave no representable interior.
        return Err(NgramError::NoGap {
            positive_lower,
            negative_upper,
        });
    }
    // Round up to the next grid point; the small slack keeps midpoints
    // that already sit on the grid (up to representation noise) in place.
    let threshold = (midpoint * THRESHOLD_STEPS_PER_UNIT - 1e-9).ceil() / THRESHOLD_STEPS_PER_UNIT;
    if threshold <= stats.negative.mean || threshold >= stats.positive.mean {
        return Err(NgramError::ThresholdOutOfRange {
            threshold,
            negative_mean: stats.negative.mean,
            positive_mean: stats.positive.mean,
        });
    }
    Ok((midpoint, threshold))
}

/// A fitted baseline: the selected n-gram sets, the statistics they
/// produced, and the derived decision threshold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ThresholdModel {
    pub rules: NgramRules,
    pub terms: TermList,
    pub bigrams: BTreeSet<String>,
    pub trigrams: BTreeSet<String>,
    pub order: NgramOrder,
    pub fraction_mode: FractionMode,
    pub limit_rule: LimitRule,
    pub stats: FractionStats,
    pub midpoint: f64,
    pub threshold: f64,
}

impl ThresholdModel {
    /// Fraction of this model's order for one report.
    pub fn fraction(&self, report: &TokenStream) -> f64 {
        let set = match self.order {
            NgramOrder::Bigram => &self.bigrams,
            NgramOrder::Trigram => &self.trigrams,
        };
        fraction_with_set(report, set, self.order, self.fraction_mode)
    }

    /// Positive iff the fraction strictly exceeds the threshold.
    pub fn classify(&self, report: &TokenStream) -> bool {
        self.fraction(report) > self.threshold
    }
}

/// Fitting inputs beyond the two report sets.
#[derive(Debug, Clone)]
pub struct FitOptions {
    pub rules: NgramRules,
    pub terms: TermList,
    pub order: NgramOrder,
    pub fraction_mode: FractionMode,
    pub limit_rule: LimitRule,
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            rules: NgramRules::default(),
            terms: default_term_list(),
            order: NgramOrder::Trigram,
            fraction_mode: FractionMode::default(),
            limit_rule: LimitRule::default(),
        }
    }
}

/// Fits the full baseline: n-gram sets from the positive reports, fraction
/// statistics from both classes, and the gap threshold.
pub fn fit(
    positive: &[TokenStream],
    negative: &[TokenStream],
    options: &FitOptions,
) -> Result<ThresholdModel, NgramError> {
    options.rules.validate()?;
    if options.terms.is_empty() {
        return Err(NgramError::EmptyTermList);
    }
    let bigram_counts = build_corpus_ngrams(positive, &options.rules, NgramOrder::Bigram)?;
    let trigram_counts = build_corpus_ngrams(positive, &options.rules, NgramOrder::Trigram)?;
    let sets = NgramSets {
        bigrams: filter_by_terms(&bigram_counts, &options.terms),
        trigrams: filter_by_terms(&trigram_counts, &options.terms),
    };
    let stats = compute_stats(positive, negative, &sets, options.order, options.fraction_mode)?;
    let (midpoint, threshold) = fit_threshold(&stats, options.limit_rule)?;
    Ok(ThresholdModel {
        rules: options.rules.clone(),
        terms: options.terms.clone(),
        bigrams: sets.bigrams,
        trigrams: sets.trigrams,
        order: options.order,
        fraction_mode: options.fraction_mode,
        limit_rule: options.limit_rule,
        stats,
        midpoint,
        threshold,
    })
}
