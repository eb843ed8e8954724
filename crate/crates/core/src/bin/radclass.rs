//! Command-line surface for the report-classification toolkit: ingest,
//! split, train, predict, evaluate, cross-validate, fit or apply the
//! n-gram baseline, inspect coefficients, and synthesize corpora.
//!
//! Exit codes: 0 on success, 1 on runtime failure, 2 on usage errors.
//! Every random stage draws from the single `--seed` flag through
//! stage-specific derived seeds, so reruns are byte-identical.

use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use radclass::corpus::{
    self, corpus_from_records, ingest_dir, parse_manifest, IngestOptions, LabelSchema,
    LabeledCorpus, Report, SchemaKind, SplitSpec, SynthSpec, FALLBACK_CLASS,
};
use radclass::eval::{
    binary_metrics, micro_macro, multiclass_roc, roc_auc, ConfusionMatrix, CvReport,
    MetricsReport, Prf,
};
use radclass::features::Weighting;
use radclass::models::{top_coefficients, ModelFamily, Prediction};
use radclass::ngram::{
    default_term_list, FitOptions, FractionMode, LimitRule, NgramOrder, NgramRules, TermList,
};
use radclass::pipeline::{
    cross_validate, derive_seed, score_map, BaselinePipeline, MulticlassStrategy, TrainOptions,
    TrainedPipeline,
};
use radclass::preprocess::CleanConfig;

/// A bad flag or config value discovered after clap parsing; mapped to
/// exit code 2 like clap's own usage errors.
#[derive(Debug)]
struct UsageError(String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

#[derive(Parser)]
#[command(
    name = "radclass",
    version,
    about = "Train, evaluate, and apply radiology report classifiers",
    after_help = "Config file: --config takes a JSON file whose fields mirror the flag \
                  names (task, family, features, c, strategy, seed, positive_class, \
                  max_depth, train_fraction, stratified, k, order, fraction_mode, \
                  limit_rule, ngram_rules, terms, clean). Flags override file values."
)]
struct Cli {
    /// Seed for every random stage (splits, folds, synthesis).
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// JSON config file; explicit flags override its values.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,

    /// Output format for reporting commands.
    #[arg(long, global = true, value_enum)]
    format: Option<FormatArg>,

    /// Shorthand for --format json.
    #[arg(long, global = true, conflicts_with = "format")]
    json: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Build a JSONL manifest from a directory of .txt reports.
    Ingest(IngestArgs),
    /// Split a labeled manifest into train and test manifests.
    Split(SplitArgs),
    /// Train a classifier and write a versioned model file.
    Train(TrainArgs),
    /// Apply a model to JSONL reports (stdin/stdout by default).
    Predict(PredictArgs),
    /// Score a predictions file against a labeled manifest.
    Eval(EvalArgs),
    /// k-fold cross-validation of a training configuration.
    Cv(CvArgs),
    /// Fit or apply the n-gram threshold baseline.
    Baseline(BaselineArgs),
    /// Show the strongest positive and negative model coefficients.
    Coeffs(CoeffsArgs),
    /// Generate a synthetic labeled corpus.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum TaskArg {
    Binary,
    Multiclass,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FamilyArg {
    Logreg,
    Svm,
    Tree,
}

impl From<FamilyArg> for ModelFamily {
    fn from(arg: FamilyArg) -> ModelFamily {
        match arg {
            FamilyArg::Logreg => ModelFamily::Logreg,
            FamilyArg::Svm => ModelFamily::Svm,
            FamilyArg::Tree => ModelFamily::Tree,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FeaturesArg {
    Count,
    Tfidf,
}

impl From<FeaturesArg> for Weighting {
    fn from(arg: FeaturesArg) -> Weighting {
        match arg {
            FeaturesArg::Count => Weighting::Count,
            FeaturesArg::Tfidf => Weighting::Tfidf,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum StrategyArg {
    Ovr,
    Ovo,
}

impl From<StrategyArg> for MulticlassStrategy {
    fn from(arg: StrategyArg) -> MulticlassStrategy {
        match arg {
            StrategyArg::Ovr => MulticlassStrategy::Ovr,
            StrategyArg::Ovo => MulticlassStrategy::Ovo,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum OrderArg {
    Bigram,
    Trigram,
}

impl From<OrderArg> for NgramOrder {
    fn from(arg: OrderArg) -> NgramOrder {
        match arg {
            OrderArg::Bigram => NgramOrder::Bigram,
            OrderArg::Trigram => NgramOrder::Trigram,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum FractionModeArg {
    Occurrences,
    Distinct,
}

impl From<FractionModeArg> for FractionMode {
    fn from(arg: FractionModeArg) -> FractionMode {
        match arg {
            FractionModeArg::Occurrences => FractionMode::Occurrences,
            FractionModeArg::Distinct => FractionMode::Distinct,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "snake_case")]
enum LimitRuleArg {
    MeanStd,
    Observed,
}

impl From<LimitRuleArg> for LimitRule {
    fn from(arg: LimitRuleArg) -> LimitRule {
        match arg {
            LimitRuleArg::MeanStd => LimitRule::MeanStd,
            LimitRuleArg::Observed => LimitRule::Observed,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Table,
    Json,
    Csv,
}

/// Config-file counterpart of the flags; any field may be omitted.
#[derive(Debug, Clone, Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    task: Option<TaskArg>,
    family: Option<FamilyArg>,
    features: Option<FeaturesArg>,
    c: Option<f64>,
    strategy: Option<StrategyArg>,
    seed: Option<u64>,
    positive_class: Option<String>,
    max_depth: Option<usize>,
    train_fraction: Option<f64>,
    stratified: Option<bool>,
    k: Option<usize>,
    order: Option<OrderArg>,
    fraction_mode: Option<FractionModeArg>,
    limit_rule: Option<LimitRuleArg>,
    ngram_rules: Option<NgramRules>,
    terms: Option<PathBuf>,
    clean: Option<CleanConfig>,
}

fn load_file_config(path: Option<&Path>) -> Result<FileConfig> {
    match path {
        None => Ok(FileConfig::default()),
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading config {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))
        }
    }
}

/// Task and class flags shared by every command that reads labels.
#[derive(Args, Clone)]
struct SchemaArgs {
    /// Task shape; defaults to binary when --positive-class is given,
    /// multiclass otherwise.
    #[arg(long, value_enum)]
    task: Option<TaskArg>,

    /// Positive class name; required for binary tasks.
    #[arg(long)]
    positive_class: Option<String>,
}

/// Model selection flags shared by train and cv.
#[derive(Args, Clone)]
struct ModelArgs {
    #[command(flatten)]
    schema: SchemaArgs,

    /// Classifier family.
    #[arg(long, value_enum)]
    family: Option<FamilyArg>,

    /// Feature weighting.
    #[arg(long, value_enum)]
    features: Option<FeaturesArg>,

    /// Inverse regularization strength for logreg and svm.
    #[arg(long)]
    c: Option<f64>,

    /// Multiclass decomposition.
    #[arg(long, value_enum)]
    strategy: Option<StrategyArg>,

    /// Depth cap for decision trees.
    #[arg(long)]
    max_depth: Option<usize>,
}

#[derive(Args)]
struct IngestArgs {
    /// Directory scanned for *.txt files (report id = file stem).
    #[arg(long)]
    dir: PathBuf,

    /// CSV file mapping id,label.
    #[arg(long)]
    labels: Option<PathBuf>,

    /// Output manifest path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Keep reports whose text is empty.
    #[arg(long)]
    allow_empty: bool,

    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct SplitArgs {
    /// Labeled input manifest.
    #[arg(long)]
    manifest: PathBuf,

    /// Output manifest for the training side.
    #[arg(long)]
    train_out: PathBuf,

    /// Output manifest for the test side.
    #[arg(long)]
    test_out: PathBuf,

    /// Fraction of each class assigned to training.
    #[arg(long)]
    train_fraction: Option<f64>,

    /// Shuffle globally instead of within each class.
    #[arg(long)]
    no_stratify: bool,

    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct TrainArgs {
    /// Labeled training manifest.
    #[arg(long)]
    manifest: PathBuf,

    /// Where to write the model file.
    #[arg(long)]
    model_out: PathBuf,

    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,

    /// Input JSONL reports (stdin when omitted).
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output JSONL predictions (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions JSONL from `predict` or `baseline predict`.
    #[arg(long)]
    predictions: PathBuf,

    /// Labeled truth manifest.
    #[arg(long)]
    truth: PathBuf,

    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct CvArgs {
    /// Labeled manifest to cross-validate on.
    #[arg(long)]
    manifest: PathBuf,

    /// Number of folds.
    #[arg(short, long)]
    k: Option<usize>,

    #[command(flatten)]
    model: ModelArgs,
}

#[derive(Args)]
struct BaselineArgs {
    #[command(subcommand)]
    action: BaselineAction,
}

#[derive(Subcommand)]
enum BaselineAction {
    /// Fit the n-gram threshold baseline on a labeled binary manifest.
    Fit(BaselineFitArgs),
    /// Apply a fitted baseline to JSONL reports.
    Predict(BaselinePredictArgs),
}

#[derive(Args)]
struct BaselineFitArgs {
    /// Labeled training manifest (binary task).
    #[arg(long)]
    manifest: PathBuf,

    /// Where to write the baseline file.
    #[arg(long)]
    model_out: PathBuf,

    /// Term list file, one lowercase token per line ('#' comments). The
    /// bundled chest X-ray list is used when omitted.
    #[arg(long)]
    terms: Option<PathBuf>,

    /// Which n-gram order drives the decision fraction.
    #[arg(long, value_enum)]
    order: Option<OrderArg>,

    /// Count every occurrence or each distinct n-gram once.
    #[arg(long, value_enum)]
    fraction_mode: Option<FractionModeArg>,

    /// Class interval limits: mean +/- std or observed extremes.
    #[arg(long, value_enum)]
    limit_rule: Option<LimitRuleArg>,

    /// Corpus frequency floor for bigrams.
    #[arg(long)]
    bigram_min_freq: Option<u32>,

    /// Minimum word length inside bigrams.
    #[arg(long)]
    bigram_min_word_len: Option<usize>,

    /// Corpus frequency floor for trigrams.
    #[arg(long)]
    trigram_min_freq: Option<u32>,

    /// Minimum word length inside trigrams.
    #[arg(long)]
    trigram_min_word_len: Option<usize>,

    /// Keep n-grams whose words contain digits.
    #[arg(long)]
    allow_numeric: bool,

    #[command(flatten)]
    schema: SchemaArgs,
}

#[derive(Args)]
struct BaselinePredictArgs {
    /// Baseline file written by `baseline fit`.
    #[arg(long)]
    model: PathBuf,

    /// Input JSONL reports (stdin when omitted).
    #[arg(long)]
    input: Option<PathBuf>,

    /// Output JSONL predictions (stdout when omitted).
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Args)]
struct CoeffsArgs {
    /// Model file with a linear binary classifier.
    #[arg(long)]
    model: PathBuf,

    /// How many tokens to list from each end.
    #[arg(short, long, default_value_t = 9)]
    n: usize,
}

#[derive(Args)]
struct SynthArgs {
    /// Number of classes (2 gives a binary schema).
    #[arg(long)]
    classes: usize,

    /// Documents generated per class.
    #[arg(long)]
    docs_per_class: usize,

    /// Distinct tokens available to each class.
    #[arg(long, default_value_t = 10)]
    vocab_per_class: usize,

    /// Fraction of each class vocabulary shared across classes.
    #[arg(long, default_value_t = 0.2)]
    overlap: f64,

    /// Output manifest path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            if err.downcast_ref::<UsageError>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = load_file_config(cli.config.as_deref())?;
    let seed = cli.seed.or(config.seed).unwrap_or(42);
    let format = if cli.json {
        FormatArg::Json
    } else {
        cli.format.unwrap_or(FormatArg::Table)
    };
    match cli.command {
        Command::Ingest(args) => cmd_ingest(args, &config),
        Command::Split(args) => cmd_split(args, &config, seed),
        Command::Train(args) => cmd_train(args, &config, format),
        Command::Predict(args) => cmd_predict(args),
        Command::Eval(args) => cmd_eval(args, &config, format),
        Command::Cv(args) => cmd_cv(args, &config, seed, format),
        Command::Baseline(args) => match args.action {
            BaselineAction::Fit(args) => cmd_baseline_fit(args, &config, format),
            BaselineAction::Predict(args) => cmd_baseline_predict(args),
        },
        Command::Coeffs(args) => cmd_coeffs(args, format),
        Command::Synth(args) => cmd_synth(args, seed),
    }
}

/// Opens the output path, or stdout when absent.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(path) => Box::new(BufWriter::new(
            File::create(path).with_context(|| format!("creating {}", path.display()))?,
        )),
        None => Box::new(BufWriter::new(std::io::stdout().lock())),
    })
}

/// Opens the input path, or stdin when absent.
fn open_input(path: Option<&Path>) -> Result<Box<dyn BufRead>> {
    Ok(match path {
        Some(path) => Box::new(BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        )),
        None => Box::new(BufReader::new(std::io::stdin().lock())),
    })
}

fn read_manifest_records(path: &Path) -> Result<Vec<(Report, Option<String>)>> {
    let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(parse_manifest(
        BufReader::new(file),
        &path.display().to_string(),
    )?)
}

/// Builds a corpus from parsed records under the task flags: explicit
/// binary schemas keep natural label names when the manifest has exactly
/// two classes, otherwise labels collapse to `positive` vs
/// `non-<positive>`; multiclass schemas span the distinct labels plus the
/// fallback class.
fn resolve_corpus(
    records: Vec<(Report, Option<String>)>,
    schema_args: &SchemaArgs,
    config: &FileConfig,
    options: IngestOptions,
) -> Result<LabeledCorpus> {
    let task = schema_args.task.or(config.task);
    let positive = schema_args
        .positive_class
        .clone()
        .or_else(|| config.positive_class.clone());
    let distinct: BTreeSet<String> = records
        .iter()
        .filter_map(|(_, label)| label.clone())
        .collect();
    if distinct.is_empty() {
        bail!("manifest carries no labels");
    }
    let task = task.unwrap_or(if positive.is_some() {
        TaskArg::Binary
    } else {
        TaskArg::Multiclass
    });
    match task {
        TaskArg::Binary => {
            let Some(positive) = positive else {
                return usage("binary tasks need --positive-class");
            };
            if !distinct.contains(&positive) {
                bail!("positive class `{positive}` does not appear in the manifest labels");
            }
            if distinct.len() == 2 {
                let negative = distinct.iter().find(|l| **l != positive).expect("two labels");
                let schema = LabelSchema::binary(&positive, negative)?;
                Ok(corpus_from_records(records, schema, options)?)
            } else {
                let corpus = corpus_from_records(records, multiclass_over(distinct)?, options)?;
                Ok(corpus.to_binary(&positive)?)
            }
        }
        TaskArg::Multiclass => {
            Ok(corpus_from_records(records, multiclass_over(distinct)?, options)?)
        }
    }
}

fn multiclass_over(labels: BTreeSet<String>) -> Result<LabelSchema> {
    let mut classes: Vec<String> = labels.into_iter().collect();
    if !classes.iter().any(|c| c == FALLBACK_CLASS) {
        classes.push(FALLBACK_CLASS.to_string());
    }
    Ok(LabelSchema::multiclass(classes)?)
}

fn load_resolved_corpus(
    path: &Path,
    schema_args: &SchemaArgs,
    config: &FileConfig,
) -> Result<LabeledCorpus> {
    let records = read_manifest_records(path)?;
    resolve_corpus(records, schema_args, config, IngestOptions::default())
}

fn train_options(args: &ModelArgs, config: &FileConfig) -> Result<TrainOptions> {
    let c = args.c.or(config.c).unwrap_or(1.0);
    if !(c > 0.0 && c.is_finite()) {
        return usage(format!("C must be positive and finite, got {c}"));
    }
    Ok(TrainOptions {
        family: args.family.or(config.family).unwrap_or(FamilyArg::Logreg).into(),
        weighting: args
            .features
            .or(config.features)
            .unwrap_or(FeaturesArg::Count)
            .into(),
        c,
        strategy: args
            .strategy
            .or(config.strategy)
            .unwrap_or(StrategyArg::Ovr)
            .into(),
        class_weights: (1.0, 1.0),
        tree_max_depth: args.max_depth.or(config.max_depth),
    })
}

fn clean_config(config: &FileConfig) -> CleanConfig {
    config.clean.clone().unwrap_or_default()
}

fn cmd_ingest(args: IngestArgs, config: &FileConfig) -> Result<()> {
    let options = IngestOptions {
        allow_empty_text: args.allow_empty,
    };
    let mut out = open_output(args.out.as_deref())?;
    match &args.labels {
        Some(labels) => {
            // The label CSV fixes the class universe; build a validated
            // corpus so bad labels fail here, not at training time.
            let probe = ingest_probe_labels(labels)?;
            let schema_args = args.schema.clone();
            let schema =
                resolve_schema_for_labels(&probe, &schema_args, config)?;
            let corpus = ingest_dir(&args.dir, Some(labels), schema, options)?;
            corpus.write_manifest(&mut out)?;
            log::info!("ingested {} reports", corpus.len());
        }
        None => {
            // Unlabeled ingest: emit bare manifest records.
            let mut paths: Vec<PathBuf> = std::fs::read_dir(&args.dir)
                .with_context(|| format!("reading {}", args.dir.display()))?
                .collect::<std::io::Result<Vec<_>>>()?
                .into_iter()
                .map(|entry| entry.path())
                .filter(|p| p.extension().is_some_and(|e| e == "txt"))
                .collect();
            paths.sort();
            #[derive(Serialize)]
            struct Record {
                id: String,
                text: String,
            }
            for path in paths {
                let id = path
                    .file_stem()
                    .map(|s| s.to_string_lossy().into_owned())
                    .unwrap_or_default();
                let text = std::fs::read_to_string(&path)?;
                if text.is_empty() && !options.allow_empty_text {
                    bail!("report `{id}` is empty; pass --allow-empty to keep it");
                }
                writeln!(out, "{}", serde_json::to_string(&Record { id, text })?)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

/// Reads the distinct labels of an id,label CSV.
fn ingest_probe_labels(path: &Path) -> Result<BTreeSet<String>> {
    let mut reader = csv::Reader::from_path(path)
        .with_context(|| format!("opening {}", path.display()))?;
    let mut labels = BTreeSet::new();
    for row in reader.deserialize() {
        let (_, label): (String, String) = row?;
        labels.insert(label);
    }
    Ok(labels)
}

/// Schema resolution shared with `resolve_corpus`, for callers that know
/// the distinct labels but have no records yet.
fn resolve_schema_for_labels(
    distinct: &BTreeSet<String>,
    schema_args: &SchemaArgs,
    config: &FileConfig,
) -> Result<LabelSchema> {
    if distinct.is_empty() {
        bail!("the label file carries no labels");
    }
    let positive = schema_args
        .positive_class
        .clone()
        .or_else(|| config.positive_class.clone());
    let task = schema_args.task.or(config.task).unwrap_or(if positive.is_some() {
        TaskArg::Binary
    } else {
        TaskArg::Multiclass
    });
    match task {
        TaskArg::Binary => {
            let Some(positive) = positive else {
                return usage("binary tasks need --positive-class");
            };
            if distinct.len() == 2 && distinct.contains(&positive) {
                let negative = distinct.iter().find(|l| **l != positive).expect("two labels");
                Ok(LabelSchema::binary(&positive, negative)?)
            } else {
                bail!(
                    "binary ingest needs exactly two label values including \
                     `{positive}`; found {:?}",
                    distinct
                );
            }
        }
        TaskArg::Multiclass => multiclass_over(distinct.clone()),
    }
}

fn cmd_split(args: SplitArgs, config: &FileConfig, seed: u64) -> Result<()> {
    let train_fraction = args
        .train_fraction
        .or(config.train_fraction)
        .unwrap_or(0.75);
    if !(train_fraction > 0.0 && train_fraction < 1.0) {
        return usage(format!(
            "--train-fraction must lie in (0, 1), got {train_fraction}"
        ));
    }
    let corpus = load_resolved_corpus(&args.manifest, &args.schema, config)?;
    let stratified = if args.no_stratify {
        false
    } else {
        config.stratified.unwrap_or(true)
    };
    let spec = SplitSpec {
        train_fraction,
        seed: derive_seed(seed, "split"),
        stratified,
    };
    let (train, test) = corpus.split(&spec)?;
    let mut train_out = open_output(Some(&args.train_out))?;
    train.write_manifest(&mut train_out)?;
    train_out.flush()?;
    let mut test_out = open_output(Some(&args.test_out))?;
    test.write_manifest(&mut test_out)?;
    test_out.flush()?;
    log::info!("split {} reports into {} train / {} test", corpus.len(), train.len(), test.len());
    Ok(())
}

#[derive(Serialize)]
struct TrainSummary {
    task: String,
    family: String,
    features: String,
    classes: Vec<String>,
    documents: usize,
    vocabulary: usize,
    model: String,
}

fn cmd_train(args: TrainArgs, config: &FileConfig, format: FormatArg) -> Result<()> {
    let options = train_options(&args.model, config)?;
    let corpus = load_resolved_corpus(&args.manifest, &args.model.schema, config)?;
    let clean = clean_config(config);
    let pipeline = TrainedPipeline::train(&corpus, &clean, &options)?;
    pipeline.save(&args.model_out)?;
    let summary = TrainSummary {
        task: format!("{:?}", pipeline.task()).to_lowercase(),
        family: pipeline.family().to_string(),
        features: match pipeline.weighting() {
            Weighting::Count => "count".into(),
            Weighting::Tfidf => "tfidf".into(),
        },
        classes: pipeline.classes().to_vec(),
        documents: corpus.len(),
        vocabulary: pipeline.vocabulary().len(),
        model: args.model_out.display().to_string(),
    };
    let mut out = open_output(None)?;
    match format {
        FormatArg::Json => writeln!(out, "{}", serde_json::to_string_pretty(&summary)?)?,
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["task", "family", "features", "classes", "documents", "vocabulary", "model"])?;
            w.write_record([
                summary.task.as_str(),
                summary.family.as_str(),
                summary.features.as_str(),
                &summary.classes.join(";"),
                &summary.documents.to_string(),
                &summary.vocabulary.to_string(),
                summary.model.as_str(),
            ])?;
            w.flush()?;
            return Ok(());
        }
        FormatArg::Table => {
            writeln!(out, "task        {}", summary.task)?;
            writeln!(out, "family      {}", summary.family)?;
            writeln!(out, "features    {}", summary.features)?;
            writeln!(out, "classes     {}", summary.classes.join(", "))?;
            writeln!(out, "documents   {}", summary.documents)?;
            writeln!(out, "vocabulary  {}", summary.vocabulary)?;
            writeln!(out, "model       {}", summary.model)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One output line per input report.
#[derive(Serialize)]
struct PredictionRecord {
    id: String,
    label: String,
    scores: BTreeMap<String, f64>,
}

fn cmd_predict(args: PredictArgs) -> Result<()> {
    let pipeline = TrainedPipeline::load(&args.model)?;
    let input = open_input(args.input.as_deref())?;
    let origin = args
        .input
        .as_deref()
        .map_or_else(|| "stdin".to_string(), |p| p.display().to_string());
    let records = parse_manifest(input, &origin)?;
    let texts: Vec<&str> = records.iter().map(|(r, _)| r.text.as_str()).collect();
    let predictions = pipeline.predict_texts(&texts)?;
    let mut out = open_output(args.output.as_deref())?;
    for ((report, _), prediction) in records.iter().zip(&predictions) {
        let record = prediction_record(&pipeline, &report.id, prediction)?;
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    out.flush()?;
    Ok(())
}

fn prediction_record(
    pipeline: &TrainedPipeline,
    id: &str,
    prediction: &Prediction,
) -> Result<PredictionRecord> {
    let label = pipeline
        .class_name(prediction.class_index)
        .context("prediction index outside the label schema")?;
    Ok(PredictionRecord {
        id: id.to_string(),
        label: label.to_string(),
        scores: score_map(pipeline.classes(), prediction),
    })
}

/// Parsed prediction line accepted by `eval`: model predictions carry a
/// score map, baseline predictions carry a fraction.
#[derive(Deserialize)]
struct PredInput {
    id: String,
    label: String,
    #[serde(default)]
    scores: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    fraction: Option<f64>,
}

#[derive(Serialize)]
struct EvalOutput {
    accuracy: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    positive_class: Option<Prf>,
    report: MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    micro_auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    macro_auc: Option<f64>,
}

fn cmd_eval(args: EvalArgs, config: &FileConfig, format: FormatArg) -> Result<()> {
    let truth_corpus = load_resolved_corpus(&args.truth, &args.schema, config)?;
    let schema = truth_corpus.schema().clone();
    let file = File::open(&args.predictions)
        .with_context(|| format!("opening {}", args.predictions.display()))?;
    let mut predictions = Vec::new();
    for (ix, line) in BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: PredInput = serde_json::from_str(&line).with_context(|| {
            format!("{} line {}", args.predictions.display(), ix + 1)
        })?;
        predictions.push(record);
    }
    if predictions.is_empty() {
        bail!("no prediction records in {}", args.predictions.display());
    }
    let mut truth_labels = Vec::with_capacity(predictions.len());
    for p in &predictions {
        let label = truth_corpus
            .label_of(&p.id)
            .with_context(|| format!("no truth label for predicted id `{}`", p.id))?;
        truth_labels.push(label.to_string());
    }
    let pred_labels: Vec<String> = predictions.iter().map(|p| p.label.clone()).collect();
    let cm = ConfusionMatrix::from_labels(&truth_labels, &pred_labels, &schema.classes)?;
    let report = micro_macro(&cm);
    let accuracy = cm.accuracy();

    // Score-based aggregates when every record carries scores.
    let mut auc = None;
    let mut micro_auc = None;
    let mut macro_auc = None;
    if schema.kind == SchemaKind::Binary {
        let positive = &schema.classes[0];
        let scores: Option<Vec<f64>> = predictions
            .iter()
            .map(|p| {
                p.scores
                    .as_ref()
                    .and_then(|s| s.get(positive).copied())
                    .or(p.fraction)
            })
            .collect();
        if let Some(scores) = scores {
            let truth_bool: Vec<bool> = truth_labels.iter().map(|l| l == positive).collect();
            auc = Some(roc_auc(&scores, &truth_bool)?.auc);
        }
    } else {
        let rows: Option<Vec<Vec<f64>>> = predictions
            .iter()
            .map(|p| {
                p.scores.as_ref().and_then(|s| {
                    schema
                        .classes
                        .iter()
                        .map(|c| s.get(c).copied())
                        .collect::<Option<Vec<f64>>>()
                })
            })
            .collect();
        if let Some(rows) = rows {
            let truth_ix: Vec<usize> = truth_labels
                .iter()
                .map(|l| schema.class_index(l).expect("validated label"))
                .collect();
            let roc = multiclass_roc(&rows, &truth_ix, schema.classes.len())?;
            micro_auc = Some(roc.micro.auc);
            macro_auc = Some(roc.macro_avg.auc);
        }
    }
    let positive_class = match schema.kind {
        SchemaKind::Binary => Some(binary_metrics(&cm)?),
        SchemaKind::Multiclass => None,
    };
    let output = EvalOutput {
        accuracy,
        positive_class,
        report,
        auc,
        micro_auc,
        macro_auc,
    };
    print_eval(&output, &schema, format)
}

fn print_eval(output: &EvalOutput, schema: &LabelSchema, format: FormatArg) -> Result<()> {
    let mut out = open_output(None)?;
    match format {
        FormatArg::Json => writeln!(out, "{}", serde_json::to_string_pretty(output)?)?,
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["class", "precision", "recall", "f1", "support"])?;
            for class in &output.report.per_class {
                w.write_record([
                    class.class.as_str(),
                    &format!("{:.6}", class.precision),
                    &format!("{:.6}", class.recall),
                    &format!("{:.6}", class.f1),
                    &class.support.to_string(),
                ])?;
            }
            for (name, prf) in [("micro", &output.report.micro), ("macro", &output.report.macro_avg)] {
                w.write_record([
                    name,
                    &format!("{:.6}", prf.precision),
                    &format!("{:.6}", prf.recall),
                    &format!("{:.6}", prf.f1),
                    "",
                ])?;
            }
            w.flush()?;
            return Ok(());
        }
        FormatArg::Table => {
            writeln!(out, "{:<20} {:>9} {:>9} {:>9} {:>9}", "class", "precision", "recall", "f1", "support")?;
            for class in &output.report.per_class {
                writeln!(
                    out,
                    "{:<20} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                    class.class, class.precision, class.recall, class.f1, class.support
                )?;
            }
            for (name, prf) in [("micro", &output.report.micro), ("macro", &output.report.macro_avg)] {
                writeln!(
                    out,
                    "{:<20} {:>9.2} {:>9.2} {:>9.2} {:>9}",
                    name, prf.precision, prf.recall, prf.f1, ""
                )?;
            }
            writeln!(out, "accuracy             {:>9.2}", output.accuracy)?;
            if let Some(prf) = &output.positive_class {
                writeln!(
                    out,
                    "positive ({})         precision {:.2}  recall {:.2}  f1 {:.2}",
                    schema.classes[0], prf.precision, prf.recall, prf.f1
                )?;
            }
            if let Some(auc) = output.auc {
                writeln!(out, "auc                  {auc:>9.4}")?;
            }
            if let (Some(micro), Some(macro_)) = (output.micro_auc, output.macro_auc) {
                writeln!(out, "auc (micro, macro)   {micro:.4}, {macro_:.4}")?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_cv(args: CvArgs, config: &FileConfig, seed: u64, format: FormatArg) -> Result<()> {
    let k = args.k.or(config.k).unwrap_or(10);
    if k < 2 {
        return usage(format!("-k must be at least 2, got {k}"));
    }
    let options = train_options(&args.model, config)?;
    let corpus = load_resolved_corpus(&args.manifest, &args.model.schema, config)?;
    let clean = clean_config(config);
    let report = cross_validate(&corpus, &clean, &options, k, derive_seed(seed, "cv"))?;
    print_cv(&report, format)
}

fn print_cv(report: &CvReport, format: FormatArg) -> Result<()> {
    let mut out = open_output(None)?;
    match format {
        FormatArg::Json => writeln!(out, "{}", serde_json::to_string_pretty(report)?)?,
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["fold", "precision", "recall"])?;
            for fold in &report.folds {
                w.write_record([
                    fold.fold.to_string(),
                    format!("{:.6}", fold.precision),
                    format!("{:.6}", fold.recall),
                ])?;
            }
            w.write_record([
                "mean".to_string(),
                format!("{:.6}", report.precision.mean),
                format!("{:.6}", report.recall.mean),
            ])?;
            w.write_record([
                "half_width_std".to_string(),
                format!("{:.6}", report.precision.half_width_std),
                format!("{:.6}", report.recall.half_width_std),
            ])?;
            w.flush()?;
            return Ok(());
        }
        FormatArg::Table => {
            writeln!(out, "{}-fold cross-validation", report.k)?;
            writeln!(out, "{:<6} {:>9} {:>9}", "fold", "precision", "recall")?;
            for fold in &report.folds {
                writeln!(out, "{:<6} {:>9.2} {:>9.2}", fold.fold, fold.precision, fold.recall)?;
            }
            writeln!(out, "{:<10} {:>14} {:>16}", "metric", "avg \u{b1} 1.96*std", "avg \u{b1} 1.96*se")?;
            for (name, summary) in [("precision", &report.precision), ("recall", &report.recall)] {
                writeln!(
                    out,
                    "{:<10} {:>14} {:>11.2} \u{b1} {:.2}",
                    name,
                    summary.display_interval(),
                    summary.mean,
                    summary.half_width_stderr
                )?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_baseline_fit(args: BaselineFitArgs, config: &FileConfig, format: FormatArg) -> Result<()> {
    let mut rules = config.ngram_rules.clone().unwrap_or_default();
    if let Some(v) = args.bigram_min_freq {
        rules.bigram_min_freq = v;
    }
    if let Some(v) = args.bigram_min_word_len {
        rules.bigram_min_word_len = v;
    }
    if let Some(v) = args.trigram_min_freq {
        rules.trigram_min_freq = v;
    }
    if let Some(v) = args.trigram_min_word_len {
        rules.trigram_min_word_len = v;
    }
    if args.allow_numeric {
        rules.forbid_numeric_chars = false;
    }
    if let Err(err) = rules.validate() {
        return usage(err.to_string());
    }
    let terms = match args.terms.as_deref().or(config.terms.as_deref()) {
        Some(path) => TermList::from_reader(BufReader::new(
            File::open(path).with_context(|| format!("opening {}", path.display()))?,
        ))?,
        None => default_term_list(),
    };
    let options = FitOptions {
        rules,
        terms,
        order: args.order.or(config.order).unwrap_or(OrderArg::Trigram).into(),
        fraction_mode: args
            .fraction_mode
            .or(config.fraction_mode)
            .unwrap_or(FractionModeArg::Occurrences)
            .into(),
        limit_rule: args
            .limit_rule
            .or(config.limit_rule)
            .unwrap_or(LimitRuleArg::MeanStd)
            .into(),
    };
    // Baseline fitting is inherently binary.
    if args.schema.task == Some(TaskArg::Multiclass) {
        return usage("the n-gram baseline only supports binary tasks");
    }
    let schema_args = SchemaArgs {
        task: Some(TaskArg::Binary),
        positive_class: args.schema.positive_class.clone(),
    };
    let corpus = load_resolved_corpus(&args.manifest, &schema_args, config)?;
    let clean = clean_config(config);
    let baseline = BaselinePipeline::fit(&corpus, &clean, &options)?;
    baseline.save(&args.model_out)?;
    let model = baseline.model();
    let mut out = open_output(None)?;
    match format {
        FormatArg::Json => writeln!(out, "{}", baseline.to_json()?)?,
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["class", "mean", "std", "n", "min", "max"])?;
            for (name, stats) in [("positive", &model.stats.positive), ("negative", &model.stats.negative)] {
                w.write_record([
                    name.to_string(),
                    format!("{:.6}", stats.mean),
                    format!("{:.6}", stats.std),
                    stats.n.to_string(),
                    format!("{:.6}", stats.min),
                    format!("{:.6}", stats.max),
                ])?;
            }
            w.write_record(["midpoint", &format!("{:.6}", model.midpoint), "", "", "", ""])?;
            w.write_record(["threshold", &format!("{:.6}", model.threshold), "", "", "", ""])?;
            w.flush()?;
            return Ok(());
        }
        FormatArg::Table => {
            writeln!(out, "{:<10} {:>8} {:>8} {:>6}", "class", "mean", "std", "n")?;
            for (name, stats) in [("positive", &model.stats.positive), ("negative", &model.stats.negative)] {
                writeln!(out, "{:<10} {:>8.4} {:>8.4} {:>6}", name, stats.mean, stats.std, stats.n)?;
            }
            writeln!(
                out,
                "decision order {} ({} bigrams, {} trigrams kept)",
                model.order,
                model.bigrams.len(),
                model.trigrams.len()
            )?;
            writeln!(out, "midpoint   {:.5}", model.midpoint)?;
            writeln!(out, "threshold  {}", model.threshold)?;
        }
    }
    out.flush()?;
    Ok(())
}

/// One baseline output line per input report.
#[derive(Serialize)]
struct BaselineRecord {
    id: String,
    label: String,
    fraction: f64,
}

fn cmd_baseline_predict(args: BaselinePredictArgs) -> Result<()> {
    let baseline = BaselinePipeline::load(&args.model)?;
    let input = open_input(args.input.as_deref())?;
    let origin = args
        .input
        .as_deref()
        .map_or_else(|| "stdin".to_string(), |p| p.display().to_string());
    let records = parse_manifest(input, &origin)?;
    let mut out = open_output(args.output.as_deref())?;
    for (report, _) in &records {
        let (positive, fraction) = baseline.classify_text(&report.text)?;
        let record = BaselineRecord {
            id: report.id.clone(),
            label: baseline.class_name(positive).to_string(),
            fraction,
        };
        writeln!(out, "{}", serde_json::to_string(&record)?)?;
    }
    out.flush()?;
    Ok(())
}

#[derive(Serialize)]
struct CoeffRow {
    token: String,
    weight: f64,
}

fn cmd_coeffs(args: CoeffsArgs, format: FormatArg) -> Result<()> {
    let pipeline = TrainedPipeline::load(&args.model)?;
    let Some(weights) = pipeline.coefficients() else {
        bail!(
            "model `{}` has no single linear coefficient vector (family {}, task {:?})",
            args.model.display(),
            pipeline.family(),
            pipeline.task()
        );
    };
    let (top, bottom) = top_coefficients(weights, pipeline.vocabulary(), args.n);
    let as_rows = |pairs: Vec<(String, f64)>| -> Vec<CoeffRow> {
        pairs
            .into_iter()
            .map(|(token, weight)| CoeffRow { token, weight })
            .collect()
    };
    let top = as_rows(top);
    let bottom = as_rows(bottom);
    let mut out = open_output(None)?;
    match format {
        FormatArg::Json => {
            #[derive(Serialize)]
            struct Output {
                top: Vec<CoeffRow>,
                bottom: Vec<CoeffRow>,
            }
            writeln!(out, "{}", serde_json::to_string_pretty(&Output { top, bottom })?)?;
        }
        FormatArg::Csv => {
            let mut w = csv::Writer::from_writer(out);
            w.write_record(["end", "token", "weight"])?;
            for (end, rows) in [("top", &top), ("bottom", &bottom)] {
                for row in rows {
                    w.write_record([end, row.token.as_str(), &format!("{:.6}", row.weight)])?;
                }
            }
            w.flush()?;
            return Ok(());
        }
        FormatArg::Table => {
            writeln!(out, "{:<24} {:>10}", "top token", "weight")?;
            for row in &top {
                writeln!(out, "{:<24} {:>10.4}", row.token, row.weight)?;
            }
            writeln!(out, "{:<24} {:>10}", "bottom token", "weight")?;
            for row in &bottom {
                writeln!(out, "{:<24} {:>10.4}", row.token, row.weight)?;
            }
        }
    }
    out.flush()?;
    Ok(())
}

fn cmd_synth(args: SynthArgs, seed: u64) -> Result<()> {
    if args.classes < 2 {
        return usage(format!("--classes must be at least 2, got {}", args.classes));
    }
    if args.docs_per_class == 0 {
        return usage("--docs-per-class must be positive");
    }
    if args.vocab_per_class < 2 {
        return usage(format!(
            "--vocab-per-class must be at least 2, got {}",
            args.vocab_per_class
        ));
    }
    if !(0.0..1.0).contains(&args.overlap) {
        return usage(format!("--overlap must lie in [0, 1), got {}", args.overlap));
    }
    let spec = SynthSpec {
        n_classes: args.classes,
        docs_per_class: args.docs_per_class,
        vocab_per_class: args.vocab_per_class,
        overlap_fraction: args.overlap,
        seed: derive_seed(seed, "synth"),
    };
    let corpus = corpus::synthesize_corpus(&spec)?;
    let mut out = open_output(args.out.as_deref())?;
    corpus.write_manifest(&mut out)?;
    out.flush()?;
    Ok(())
}
