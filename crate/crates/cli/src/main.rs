//! `cantm` command-line tool.
//!
//! Exit status: 0 on success, 1 for usage or validation errors, 2 for
//! runtime failures (I/O, numerical breakdown).

mod commands;
mod config;
mod plot;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "cantm", version, about = "Classification-aware neural topic modelling toolkit")]
pub struct Cli {
    /// Seed for every random choice (initialization, shuffling, sampling, folds).
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    /// JSON configuration document; command-line flags take precedence.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Suppress progress and notices on stderr.
    #[arg(long, global = true)]
    pub quiet: bool,
    /// Output file (a directory for `analyze`).
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a debunk export and write normalized records as JSON lines.
    Ingest(IngestArgs),
    /// Normalize veracity and platform fields and extract media types.
    Enrich(EnrichArgs),
    /// Filter annotations, report agreement and merge them into one label per document.
    MergeAnnotations(MergeArgs),
    /// Train a model and write a checkpoint.
    Train(TrainArgs),
    /// Score a checkpoint on labelled data, or run k-fold cross-validation.
    Evaluate(EvaluateArgs),
    /// Predict a category and class distribution for each input document.
    Predict(PredictArgs),
    /// Print the top words of a checkpoint's topic matrices.
    Topics(TopicsArgs),
    /// Weekly trends and stacked breakdowns as CSV tables and SVG charts.
    Analyze(AnalyzeArgs),
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    /// Debunk export (.jsonl or .csv).
    #[arg(long)]
    pub input: PathBuf,
    /// Also write the vocabulary built from the records.
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct EnrichArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Veracity mapping list (JSON object: standard value → raw words).
    #[arg(long)]
    pub veracity_map: Option<PathBuf>,
    /// Platform mapping list.
    #[arg(long)]
    pub platform_map: Option<PathBuf>,
    /// Media-type pattern rules.
    #[arg(long)]
    pub media_rules: Option<PathBuf>,
    /// JSON lines of {"id", "text"} holding fetched source-page text.
    #[arg(long)]
    pub source_pages: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct MergeArgs {
    /// Annotation JSON lines: {doc_id, annotator_id, category, confidence}.
    #[arg(long)]
    pub input: PathBuf,
    /// Minimum confidence kept (overrides the configured default).
    #[arg(long)]
    pub threshold: Option<u8>,
    /// Annotator to drop entirely; repeatable.
    #[arg(long = "exclude")]
    pub exclude: Vec<String>,
    /// Debunk records to label; when given, the output is the labelled records.
    #[arg(long)]
    pub records: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum EncoderArg {
    Bow,
    Embedding,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum VariantArg {
    Cantm,
    Nvdm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Full,
    #[value(name = "m2_only", alias = "m2-only")]
    M2Only,
}

#[derive(Debug, Args)]
pub struct TextArgs {
    /// Stopword list, one word per line (defaults to the built-in English list).
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
    /// Maximum vocabulary size.
    #[arg(long)]
    pub vocab_size: Option<usize>,
}

#[derive(Debug, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub encoder: Option<EncoderArg>,
    /// Precomputed document embeddings (JSON lines with a {"dim": N} header).
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub variant: Option<VariantArg>,
    /// Encoder output width for the bag-of-words encoder.
    #[arg(long)]
    pub d_h: Option<usize>,
    #[arg(long)]
    pub d_z: Option<usize>,
    #[arg(long)]
    pub d_zs: Option<usize>,
    #[arg(long)]
    pub d_t: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[command(flatten)]
    pub text: TextArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Labelled debunk records.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum, default_value = "full")]
    pub mode: ModeArg,
    /// Trained checkpoint whose M1 part is kept frozen (required with --mode m2_only).
    #[arg(long)]
    pub m1_checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub model: ModelArgs,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    #[arg(long)]
    pub input: PathBuf,
    /// Score this checkpoint instead of cross-validating.
    #[arg(long)]
    pub model: Option<PathBuf>,
    /// Number of cross-validation folds.
    #[arg(long)]
    pub folds: Option<usize>,
    /// Normalize perplexity over all tokens instead of per document.
    #[arg(long)]
    pub corpus_perplexity: bool,
    /// Name used in the printed results row.
    #[arg(long, default_value = "CANTM")]
    pub name: String,
    #[command(flatten)]
    pub model_args: ModelArgs,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// JSON lines with an id ("doc_id" or "id") and "text" or "claim"/"explanation".
    #[arg(long)]
    pub input: PathBuf,
    /// Required for checkpoints trained on precomputed embeddings.
    #[arg(long)]
    pub embeddings: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KindArg {
    Latent,
    #[value(name = "class_associated", alias = "class-associated")]
    ClassAssociated,
    #[value(name = "classification_aware", alias = "classification-aware")]
    ClassificationAware,
    All,
}

#[derive(Debug, Args)]
pub struct TopicsArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long, value_enum, default_value = "all")]
    pub kind: KindArg,
    /// Words per topic.
    #[arg(short, long, default_value_t = cantm::topics::DEFAULT_TOP_K)]
    pub k: usize,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Debunk records.
    #[arg(long)]
    pub input: PathBuf,
    /// First day of the trend range (defaults to the earliest record).
    #[arg(long)]
    pub start: Option<chrono::NaiveDate>,
    /// Last day of the trend range (defaults to the latest record).
    #[arg(long)]
    pub end: Option<chrono::NaiveDate>,
    /// Search-interest export (week,value CSV) drawn next to the debunk trend.
    #[arg(long)]
    pub search_trends: Option<PathBuf>,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
