//! Text cleaning and tokenization.
//!
//! Cleaning order is fixed: header/footer lines and de-identification spans
//! are removed first, then lowercasing, character stripping, and whitespace
//! collapsing. With the default configuration cleaning is idempotent for any
//! input; custom header/footer patterns are matched against raw lines, so
//! idempotence additionally requires that no such pattern fully matches the
//! cleaned single-line output.

use serde::{Deserialize, Serialize};

use crate::features::Vocabulary;

/// Errors from cleaning configuration or vocabulary construction.
#[derive(Debug, thiserror::Error)]
pub enum PreprocessError {
    #[error("invalid pattern `{pattern}`: {source}")]
    InvalidPattern {
        pattern: String,
        source: regex::Error,
    },
    #[error("no tokens in any input stream")]
    EmptyVocabulary,
    #[error("invalid token `{0}`: tokens must be non-empty and contain no whitespace")]
    InvalidToken(String),
}

/// Configuration for [`Cleaner`]. Serialized into saved models so inference
/// replays training-time preprocessing exactly.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CleanConfig {
    /// Replace every non-alphanumeric, non-whitespace character with a space.
    pub strip_non_alphanumeric: bool,
    /// Replace ASCII punctuation with spaces (subsumed by
    /// `strip_non_alphanumeric` when that is set).
    pub strip_punctuation: bool,
    /// Lowercase the text after stripping.
    pub lowercase: bool,
    /// Regexes whose matches are removed anywhere in the text, e.g.
    /// de-identification placeholders.
    pub deid_patterns: Vec<String>,
    /// Regexes matched against whole lines (implicitly anchored); matching
    /// lines are dropped.
    pub header_footer_patterns: Vec<String>,
}

impl Default for CleanConfig {
    fn default() -> Self {
        CleanConfig {
            strip_non_alphanumeric: true,
            strip_punctuation: true,
            lowercase: true,
            // [**...**] placeholders and bracketed spans containing a digit
            // (dates, accession numbers).
            deid_patterns: vec![
                r"\[\*\*[^\]]*\*\*\]".to_string(),
                r"\[[^\]]*[0-9][^\]]*\]".to_string(),
            ],
            header_footer_patterns: Vec::new(),
        }
    }
}

impl CleanConfig {
    /// Adds literal lines (regex-escaped) to the header/footer drop list.
    pub fn add_literal_header_lines<I, S>(&mut self, lines: I)
    where
        I: IntoIterator<Item = S>,
        S: AsRef<str>,
    {
        for line in lines {
            self.header_footer_patterns.push(regex::escape(line.as_ref()));
        }
    }
}

/// A [`CleanConfig`] with its patterns compiled.
#[derive(Debug, Clone)]
pub struct Cleaner {
    config: CleanConfig,
    deid: Vec<regex::Regex>,
    header_footer: Vec<regex::Regex>,
}

impl Cleaner {
    /// Compiles all patterns in `config`; fails on the first invalid one.
    pub fn new(config: &CleanConfig) -> Result<Cleaner, PreprocessError> {
        let compile = |pattern: &str| {
            regex::Regex::new(pattern).map_err(|source| PreprocessError::InvalidPattern {
                pattern: pattern.to_string(),
                source,
            })
        };
        let deid = config
            .deid_patterns
            .iter()
            .map(|p| compile(p))
            .collect::<Result<_, _>>()?;
        let header_footer = config
            .header_footer_patterns
            .iter()
            // Anchored so a pattern describes an entire line; this keeps
            // cleaning idempotent after lines are joined by whitespace
            // collapsing.
            .map(|p| compile(&format!("^(?:{p})$")))
            .collect::<Result<_, _>>()?;
        Ok(Cleaner {
            config: config.clone(),
            deid,
            header_footer,
        })
    }

    pub fn config(&self) -> &CleanConfig {
        &self.config
    }

    /// Cleans one report text. Never fails; output has single spaces between
    /// words and no leading/trailing whitespace.
    pub fn clean(&self, text: &str) -> String {
        let mut kept: String = text
            .lines()
            .filter(|line| !self.header_footer.iter().any(|re| re.is_match(line)))
            .collect::<Vec<_>>()
            .join("\n");
        for re in &self.deid {
            kept = re.replace_all(&kept, " ").into_owned();
        }
        // Lowercasing precedes stripping: some case mappings introduce
        // combining marks, which the strip pass then removes, keeping
        // clean(clean(x)) == clean(x).
        let cased = if self.config.lowercase {
            kept.to_lowercase()
        } else {
            kept
        };
        let stripped: String = cased
            .chars()
            .map(|c| {
                let strip = if self.config.strip_non_alphanumeric {
                    !c.is_alphanumeric() && !c.is_whitespace()
                } else {
                    self.config.strip_punctuation && c.is_ascii_punctuation()
                };
                if strip {
                    ' '
                } else {
                    c
                }
            })
            .collect();
        stripped.split_whitespace().collect::<Vec<_>>().join(" ")
    }
}

/// Tokens of one document: lowercase, at least two characters, never pure
/// numeric, no internal whitespace.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TokenStream(Vec<String>);

impl TokenStream {
    /// Wraps pre-tokenized words, rejecting empty or whitespace-bearing ones.
    pub fn new(tokens: Vec<String>) -> Result<TokenStream, PreprocessError> {
        for t in &tokens {
            if t.is_empty() || t.chars().any(char::is_whitespace) {
                return Err(PreprocessError::InvalidToken(t.clone()));
            }
        }
        Ok(TokenStream(tokens))
    }

    pub fn tokens(&self) -> &[String] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> std::slice::Iter<'_, String> {
        self.0.iter()
    }
}

/// Splits text into tokens: maximal runs of alphanumeric characters,
/// lowercased, dropping tokens shorter than two characters or consisting
/// entirely of digits. Total over arbitrary input; empty text gives an empty
/// stream.
pub fn tokenize(text: &str) -> TokenStream {
    let tokens = text
        .split(|c: char| !c.is_alphanumeric())
        .filter(|run| run.chars().count() >= 2)
        .filter(|run| !run.chars().all(char::is_numeric))
        .map(|run| run.to_lowercase())
        .collect();
    TokenStream(tokens)
}

/// Collects the distinct tokens of all streams into a [`Vocabulary`] with
/// deterministic lexicographic indices. Errors if every stream is empty.
pub fn build_vocabulary(streams: &[TokenStream]) -> Result<Vocabulary, PreprocessError> {
    let distinct: std::collections::BTreeSet<&str> = streams
        .iter()
        .flat_map(|s| s.iter().map(String::as_str))
        .collect();
    if distinct.is_empty() {
        return Err(PreprocessError::EmptyVocabulary);
    }
    Ok(Vocabulary::from_sorted_unique(
        distinct.into_iter().map(str::to_string).collect(),
    ))
}

/// Lines occurring verbatim in more than `min_fraction` of the texts,
/// candidates for header/footer removal. Lines are compared after trimming;
/// blank lines are ignored.
pub fn frequent_lines(texts: &[String], min_fraction: f64) -> Vec<String> {
    let mut counts: std::collections::BTreeMap<&str, usize> = std::collections::BTreeMap::new();
    for text in texts {
        let distinct: std::collections::BTreeSet<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty())
            .collect();
        for line in distinct {
            *counts.entry(line).or_insert(0) += 1;
        }
    }
    let cutoff = min_fraction * texts.len() as f64;
    counts
        .into_iter()
        .filter(|&(_, n)| n as f64 > cutoff)
        .map(|(line, _)| line.to_string())
        .collect()
}
