//! Report ingestion, labeled corpora, deterministic splits, and synthetic
//! corpus generation.
//!
//! The on-disk corpus format is a JSONL manifest with one record per line:
//! `{"id": ..., "text": ..., "label": ..., "source": ...}` where `label` and
//! `source` are optional. Reports may alternatively be ingested from a
//! directory of `.txt` files with a `id,label` CSV label map.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{BufRead, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

/// Name of the designated fallback class every multiclass schema must carry.
pub const FALLBACK_CLASS: &str = "other";

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("{path}:{line}: malformed manifest record: {msg}")]
    Manifest {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("duplicate report id `{0}`")]
    DuplicateId(String),
    #[error("report `{id}`: label `{label}` is not a schema class")]
    UnknownLabel { id: String, label: String },
    #[error("report `{0}` has empty text, which the ingest options forbid")]
    EmptyText(String),
    #[error("report `{0}` is unlabeled")]
    Unlabeled(String),
    #[error("class `{0}` is not in the schema")]
    UnknownClass(String),
    #[error("invalid schema: {0}")]
    InvalidSchema(String),
    #[error("invalid parameter: {0}")]
    InvalidParam(String),
    #[error("class `{class}` has {count} report(s); stratified splitting needs at least 2")]
    TooFewMembers { class: String, count: usize },
    #[error("corpus is empty")]
    Empty,
    #[error("label map: {0}")]
    LabelMap(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One report: an identifier, its raw text, and an optional provenance tag.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Report {
    pub id: String,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SchemaKind {
    Binary,
    Multiclass,
}

/// The class universe of a task. Binary schemas order their classes
/// `[positive, negative]`; multiclass schemas must include the
/// [`FALLBACK_CLASS`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct LabelSchema {
    pub kind: SchemaKind,
    pub classes: Vec<String>,
    pub positive_class: Option<String>,
}

impl LabelSchema {
    pub fn binary(positive: &str, negative: &str) -> Result<LabelSchema, CorpusError> {
        let schema = LabelSchema {
            kind: SchemaKind::Binary,
            classes: vec![positive.to_string(), negative.to_string()],
            positive_class: Some(positive.to_string()),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn multiclass(classes: Vec<String>) -> Result<LabelSchema, CorpusError> {
        let schema = LabelSchema {
            kind: SchemaKind::Multiclass,
            classes,
            positive_class: None,
        };
        schema.validate()?;
        Ok(schema)
    }

    /// Checks the structural invariants; called on construction and when
    /// loading serialized schemas.
    pub fn validate(&self) -> Result<(), CorpusError> {
        if self.classes.iter().any(String::is_empty) {
            return Err(CorpusError::InvalidSchema("empty class name".into()));
        }
        let distinct: HashSet<&str> = self.classes.iter().map(String::as_str).collect();
        if distinct.len() != self.classes.len() {
            return Err(CorpusError::InvalidSchema("duplicate class names".into()));
        }
        match self.kind {
            SchemaKind::Binary => {
                if self.classes.len() != 2 {
                    return Err(CorpusError::InvalidSchema(format!(
                        "binary schema needs exactly 2 classes, got {}",
                        self.classes.len()
                    )));
                }
                match &self.positive_class {
                    Some(p) if *p == self.classes[0] => {}
                    Some(p) => {
                        return Err(CorpusError::InvalidSchema(format!(
                            "positive class `{p}` must be listed first"
                        )))
                    }
                    None => {
                        return Err(CorpusError::InvalidSchema(
                            "binary schema needs a positive class".into(),
                        ))
                    }
                }
            }
            SchemaKind::Multiclass => {
                if self.classes.len() < 2 {
                    return Err(CorpusError::InvalidSchema(
                        "multiclass schema needs at least 2 classes".into(),
                    ));
                }
                if !distinct.contains(FALLBACK_CLASS) {
                    return Err(CorpusError::InvalidSchema(format!(
                        "multiclass schema must include the `{FALLBACK_CLASS}` fallback class"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn class_index(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

/// Per-class counts and fractions of the labeled part of a corpus.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassDistribution {
    pub counts: BTreeMap<String, usize>,
    pub fractions: BTreeMap<String, f64>,
    pub unlabeled: usize,
}

/// How to divide a corpus into train and test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
    /// Preserve per-class proportions. On by default.
    pub stratified: bool,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.75,
            seed: 0,
            stratified: true,
        }
    }
}

/// Reports plus a (possibly partial) id-to-label assignment under a schema.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledCorpus {
    reports: Vec<Report>,
    labels: HashMap<String, String>,
    schema: LabelSchema,
}

impl LabeledCorpus {
    /// Validates ids are unique and all labels name schema classes of
    /// existing reports.
    pub fn new(
        reports: Vec<Report>,
        labels: HashMap<String, String>,
        schema: LabelSchema,
    ) -> Result<LabeledCorpus, CorpusError> {
        schema.validate()?;
        let mut ids = HashSet::new();
        for r in &reports {
            if !ids.insert(r.id.as_str()) {
                return Err(CorpusError::DuplicateId(r.id.clone()));
            }
        }
        for (id, label) in &labels {
            if !ids.contains(id.as_str()) {
                return Err(CorpusError::InvalidParam(format!(
                    "label for unknown report id `{id}`"
                )));
            }
            if schema.class_index(label).is_none() {
                return Err(CorpusError::UnknownLabel {
                    id: id.clone(),
                    label: label.clone(),
                });
            }
        }
        Ok(LabeledCorpus {
            reports,
            labels,
            schema,
        })
    }

    pub fn len(&self) -> usize {
        self.reports.len()
    }

    pub fn is_empty(&self) -> bool {
        self.reports.is_empty()
    }

    pub fn reports(&self) -> &[Report] {
        &self.reports
    }

    pub fn schema(&self) -> &LabelSchema {
        &self.schema
    }

    pub fn label_of(&self, id: &str) -> Option<&str> {
        self.labels.get(id).map(String::as_str)
    }

    /// Class index per report, in report order. Errors on the first
    /// unlabeled report.
    pub fn label_indices(&self) -> Result<Vec<usize>, CorpusError> {
        self.reports
            .iter()
            .map(|r| {
                let label = self
                    .label_of(&r.id)
                    .ok_or_else(|| CorpusError::Unlabeled(r.id.clone()))?;
                Ok(self.schema.class_index(label).expect("validated label"))
            })
            .collect()
    }

    /// Counts and fractions per class over the labeled reports.
    pub fn class_distribution(&self) -> Result<ClassDistribution, CorpusError> {
        if self.reports.is_empty() {
            return Err(CorpusError::Empty);
        }
        let mut counts: BTreeMap<String, usize> =
            self.schema.classes.iter().map(|c| (c.clone(), 0)).collect();
        let mut labeled = 0usize;
        for r in &self.reports {
            if let Some(label) = self.label_of(&r.id) {
                *counts.get_mut(label).expect("validated label") += 1;
                labeled += 1;
            }
        }
        let fractions = counts
            .iter()
            .map(|(c, &n)| {
                let f = if labeled == 0 { 0.0 } else { n as f64 / labeled as f64 };
                (c.clone(), f)
            })
            .collect();
        Ok(ClassDistribution {
            counts,
            fractions,
            unlabeled: self.reports.len() - labeled,
        })
    }

    /// Collapses the schema to `positive` vs `non-<positive>`, keeping report
    /// order. Applying it twice with the same class is a no-op. Logs a
    /// warning when no report carries the positive label.
    pub fn to_binary(&self, positive: &str) -> Result<LabeledCorpus, CorpusError> {
        if self.schema.class_index(positive).is_none() {
            return Err(CorpusError::UnknownClass(positive.to_string()));
        }
        if self.schema.kind == SchemaKind::Binary
            && self.schema.positive_class.as_deref() == Some(positive)
        {
            return Ok(self.clone());
        }
        let negative = format!("non-{positive}");
        let schema = LabelSchema::binary(positive, &negative)?;
        let labels: HashMap<String, String> = self
            .labels
            .iter()
            .map(|(id, label)| {
                let mapped = if label == positive {
                    positive.to_string()
                } else {
                    negative.clone()
                };
                (id.clone(), mapped)
            })
            .collect();
        if !labels.values().any(|l| l == positive) {
            log::warn!("to_binary: no report is labeled `{positive}`; all labels are negative");
        }
        LabeledCorpus::new(self.reports.clone(), labels, schema)
    }

    /// Splits into (train, test). Every report must be labeled. Stratified
    /// splitting shuffles within each class and puts `ceil(fraction * n)` of
    /// the class in train, clamped so both sides keep at least one report of
    /// the class.
    pub fn split(&self, spec: &SplitSpec) -> Result<(LabeledCorpus, LabeledCorpus), CorpusError> {
        if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
            return Err(CorpusError::InvalidParam(format!(
                "train_fraction must lie in (0, 1), got {}",
                spec.train_fraction
            )));
        }
        let label_ix = self.label_indices()?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let mut train_ix: Vec<usize> = Vec::new();
        let mut test_ix: Vec<usize> = Vec::new();
        if spec.stratified {
            for (class_ix, class) in self.schema.classes.iter().enumerate() {
                let mut members: Vec<usize> = (0..self.reports.len())
                    .filter(|&i| label_ix[i] == class_ix)
                    .collect();
                if members.is_empty() {
                    continue;
                }
                if members.len() < 2 {
                    return Err(CorpusError::TooFewMembers {
                        class: class.clone(),
                        count: members.len(),
                    });
                }
                members.shuffle(&mut rng);
                let take = split_point(members.len(), spec.train_fraction);
                train_ix.extend(&members[..take]);
                test_ix.extend(&members[take..]);
            }
        } else {
            if self.reports.len() < 2 {
                return Err(CorpusError::TooFewMembers {
                    class: "<all>".into(),
                    count: self.reports.len(),
                });
            }
            let mut all: Vec<usize> = (0..self.reports.len()).collect();
            all.shuffle(&mut rng);
            let take = split_point(all.len(), spec.train_fraction);
            train_ix.extend(&all[..take]);
            test_ix.extend(&all[take..]);
        }
        train_ix.sort_unstable();
        test_ix.sort_unstable();
        Ok((self.subset(&train_ix), self.subset(&test_ix)))
    }

    fn subset(&self, indices: &[usize]) -> LabeledCorpus {
        let reports: Vec<Report> = indices.iter().map(|&i| self.reports[i].clone()).collect();
        let labels = reports
            .iter()
            .filter_map(|r| self.labels.get(&r.id).map(|l| (r.id.clone(), l.clone())))
            .collect();
        LabeledCorpus {
            reports,
            labels,
            schema: self.schema.clone(),
        }
    }

    /// Writes the corpus back out as a JSONL manifest, one record per report
    /// in corpus order.
    pub fn write_manifest<W: Write>(&self, mut out: W) -> Result<(), CorpusError> {
        for r in &self.reports {
            let record = ManifestRecord {
                id: r.id.clone(),
                text: r.text.clone(),
                label: self.label_of(&r.id).map(str::to_string),
                source: r.source.clone(),
            };
            let line = serde_json::to_string(&record)
                .map_err(|e| CorpusError::InvalidParam(e.to_string()))?;
            writeln!(out, "{line}")?;
        }
        Ok(())
    }
}

/// Train-side size of a deterministic split: the fractional report goes to
/// train, but both sides keep at least one element.
fn split_point(n: usize, fraction: f64) -> usize {
    ((fraction * n as f64).ceil() as usize).clamp(1, n - 1)
}

/// Ingestion policy knobs.
#[derive(Debug, Clone, Copy, Default, Serialize, Deserialize)]
pub struct IngestOptions {
    /// Accept reports whose text is empty. Off by default.
    pub allow_empty_text: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ManifestRecord {
    id: String,
    text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    label: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    source: Option<String>,
}

/// Parses JSONL manifest records, reporting the offending line on error.
/// Blank lines are skipped. `origin` names the stream in error messages.
pub fn parse_manifest<R: BufRead>(
    reader: R,
    origin: &str,
) -> Result<Vec<(Report, Option<String>)>, CorpusError> {
    let mut records = Vec::new();
    for (ix, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: ManifestRecord =
            serde_json::from_str(&line).map_err(|e| CorpusError::Manifest {
                path: origin.to_string(),
                line: ix + 1,
                msg: e.to_string(),
            })?;
        records.push((
            Report {
                id: record.id,
                text: record.text,
                source: record.source,
            },
            record.label,
        ));
    }
    Ok(records)
}

/// Loads a JSONL manifest into a corpus under `schema`.
pub fn load_corpus(
    path: &Path,
    schema: LabelSchema,
    options: IngestOptions,
) -> Result<LabeledCorpus, CorpusError> {
    let file = std::fs::File::open(path)?;
    let records = parse_manifest(std::io::BufReader::new(file), &path.display().to_string())?;
    corpus_from_records(records, schema, options)
}

/// Assembles parsed records into a validated corpus.
pub fn corpus_from_records(
    records: Vec<(Report, Option<String>)>,
    schema: LabelSchema,
    options: IngestOptions,
) -> Result<LabeledCorpus, CorpusError> {
    let mut reports = Vec::with_capacity(records.len());
    let mut labels = HashMap::new();
    for (report, label) in records {
        if report.text.is_empty() && !options.allow_empty_text {
            return Err(CorpusError::EmptyText(report.id));
        }
        if let Some(label) = label {
            labels.insert(report.id.clone(), label);
        }
        reports.push(report);
    }
    LabeledCorpus::new(reports, labels, schema)
}

/// Ingests a directory of `.txt` reports (id = file stem, sorted by name)
/// with an optional `id,label` CSV label map.
pub fn ingest_dir(
    dir: &Path,
    label_map: Option<&Path>,
    schema: LabelSchema,
    options: IngestOptions,
) -> Result<LabeledCorpus, CorpusError> {
    let mut paths: Vec<_> = std::fs::read_dir(dir)?
        .collect::<Result<Vec<_>, _>>()?
        .into_iter()
        .map(|entry| entry.path())
        .filter(|p| p.extension().is_some_and(|e| e == "txt"))
        .collect();
    paths.sort();
    let mut labels: HashMap<String, String> = HashMap::new();
    if let Some(csv_path) = label_map {
        let mut reader = csv::Reader::from_path(csv_path)?;
        for row in reader.deserialize() {
            let (id, label): (String, String) = row?;
            labels.insert(id, label);
        }
    }
    let records = paths
        .into_iter()
        .map(|p| {
            let id = p
                .file_stem()
                .map(|s| s.to_string_lossy().into_owned())
                .unwrap_or_default();
            let text = std::fs::read_to_string(&p)?;
            let label = labels.get(&id).cloned();
            Ok((Report { id, text, source: None }, label))
        })
        .collect::<Result<Vec<_>, CorpusError>>()?;
    corpus_from_records(records, schema, options)
}

/// Parameters for [`synthesize_corpus`].
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SynthSpec {
    pub n_classes: usize,
    pub docs_per_class: usize,
    /// Distinct tokens available to each class.
    pub vocab_per_class: usize,
    /// Fraction of each class vocabulary drawn from a pool shared across
    /// classes, in `[0, 1)`.
    pub overlap_fraction: f64,
    pub seed: u64,
}

/// Generates a deterministic synthetic corpus. Every document of a class
/// contains that class's marker token and no other class's marker, so the
/// classes are linearly separable by construction; with zero overlap a
/// single-feature rule on any marker separates them. Two classes yield a
/// binary schema, more yield a multiclass schema whose last class is the
/// fallback.
pub fn synthesize_corpus(spec: &SynthSpec) -> Result<LabeledCorpus, CorpusError> {
    if spec.n_classes < 2 {
        return Err(CorpusError::InvalidParam("n_classes must be at least 2".into()));
    }
    if spec.docs_per_class == 0 {
        return Err(CorpusError::InvalidParam("docs_per_class must be positive".into()));
    }
    if spec.vocab_per_class < 2 {
        return Err(CorpusError::InvalidParam("vocab_per_class must be at least 2".into()));
    }
    if !(0.0..1.0).contains(&spec.overlap_fraction) {
        return Err(CorpusError::InvalidParam(
            "overlap_fraction must lie in [0, 1)".into(),
        ));
    }

    let class_names: Vec<String> = if spec.n_classes == 2 {
        vec!["c00".into(), "c01".into()]
    } else {
        (0..spec.n_classes - 1)
            .map(|c| format!("c{c:02}"))
            .chain(std::iter::once(FALLBACK_CLASS.to_string()))
            .collect()
    };
    let schema = if spec.n_classes == 2 {
        LabelSchema::binary("c00", "c01")?
    } else {
        LabelSchema::multiclass(class_names.clone())?
    };

    let shared_pool: Vec<String> = (0..spec.vocab_per_class)
        .map(|i| format!("shared{i:03}"))
        .collect();
    let n_shared = ((spec.overlap_fraction * spec.vocab_per_class as f64).round() as usize)
        .min(spec.vocab_per_class - 1);

    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let mut reports = Vec::with_capacity(spec.n_classes * spec.docs_per_class);
    let mut labels = HashMap::new();
    for (c, class) in class_names.iter().enumerate() {
        let mut class_vocab: Vec<String> = (0..spec.vocab_per_class - n_shared)
            .map(|j| format!("c{c:02}t{j:03}"))
            .collect();
        let mut pool_ix: Vec<usize> = (0..shared_pool.len()).collect();
        pool_ix.shuffle(&mut rng);
        class_vocab.extend(pool_ix[..n_shared].iter().map(|&i| shared_pool[i].clone()));
        let marker = format!("c{c:02}t000");

        for d in 0..spec.docs_per_class {
            let len = rng.gen_range(20..=40);
            let mut words = Vec::with_capacity(len);
            words.push(marker.clone());
            for _ in 1..len {
                words.push(class_vocab[rng.gen_range(0..class_vocab.len())].clone());
            }
            let id = format!("{class}-{d:04}");
            labels.insert(id.clone(), class.clone());
            reports.push(Report {
                id,
                text: words.join(" "),
                source: Some("synthetic".into()),
            });
        }
    }
    LabeledCorpus::new(reports, labels, schema)
}
