//! The `embeval` command line.
//!
//! Every subcommand writes its artifacts plus a `manifest.json` (input
//! SHA-256 digests, resolved settings, tool version) into `--out-dir`.
//! Exit codes: 0 success, 2 usage or file errors, 3 data or validation errors.

mod commands;
pub mod config;
mod run;

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

pub use run::{InputDigest, Manifest};

pub const EXIT_USAGE: i32 = 2;
pub const EXIT_DATA: i32 = 3;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_USAGE,
            message: message.into(),
        }
    }

    pub fn data(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_DATA,
            message: message.into(),
        }
    }

    /// Library errors with a context prefix. I/O failures and bad arguments
    /// are usage errors, everything else concerns the data.
    pub fn library(context: impl std::fmt::Display, e: crate::Error) -> Self {
        let code = match e {
            crate::Error::Io(_) | crate::Error::Argument(_) => EXIT_USAGE,
            _ => EXIT_DATA,
        };
        CliError {
            code,
            message: format!("{context}: {e}"),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

#[derive(Debug, Parser)]
#[command(name = "embeval", version, about = "Evaluate and compare word embeddings")]
pub struct Cli {
    /// Seed for every random choice of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory receiving all outputs and the manifest.
    #[arg(long, global = true, default_value = "embeval-out")]
    pub out_dir: PathBuf,
    /// key = value settings file; flags take precedence over it.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pairwise vocabulary overlap of embeddings and corpora.
    Overlap(OverlapArgs),
    /// Build a table from occurrence vectors and/or reduce it with SVD.
    Derive(DeriveArgs),
    /// Neighbour lists, agreement, correlation and t-SNE plots.
    Intrinsic(IntrinsicArgs),
    /// Train the sequence tagger.
    Train(TrainArgs),
    /// Evaluate a tagger checkpoint on a labelled file.
    Eval(EvalArgs),
    /// Nearest neighbours of one word in one table.
    Query(QueryArgs),
}

#[derive(Debug, Args)]
pub struct OverlapArgs {
    /// word2vec file (`.bin` for binary); repeatable.
    #[arg(long = "embedding")]
    pub embeddings: Vec<PathBuf>,
    /// CoNLL corpus; repeatable.
    #[arg(long = "corpus")]
    pub corpora: Vec<PathBuf>,
    /// One stopword per line.
    #[arg(long)]
    pub stopwords: Option<PathBuf>,
}

#[derive(Debug, Args)]
#[command(group = clap::ArgGroup::new("input").required(true).args(["occurrences", "embedding"]))]
pub struct DeriveArgs {
    /// `word<TAB>v1 v2 ...` lines, one per occurrence.
    #[arg(long)]
    pub occurrences: Option<PathBuf>,
    /// Existing table to reduce.
    #[arg(long)]
    pub embedding: Option<PathBuf>,
    /// Keep only these words (one per line).
    #[arg(long)]
    pub vocab: Option<PathBuf>,
    /// Reduce to this many dimensions with truncated SVD.
    #[arg(long)]
    pub target_dim: Option<usize>,
    /// Do not subtract the column mean before the SVD.
    #[arg(long)]
    pub no_center: bool,
    /// Output file (`.bin` for binary); defaults to `<out-dir>/derived.txt`.
    #[arg(long)]
    pub output: Option<PathBuf>,
    /// Name of the derived table.
    #[arg(long)]
    pub name: Option<String>,
}

#[derive(Debug, Args)]
pub struct IntrinsicArgs {
    /// word2vec file; repeatable.
    #[arg(long = "embedding", required = true)]
    pub embeddings: Vec<PathBuf>,
    #[arg(long)]
    pub query: Option<String>,
    /// Neighbours per list.
    #[arg(short, long)]
    pub k: Option<usize>,
    /// `term<TAB>identifier` normalization dictionary.
    #[arg(long)]
    pub dictionary: Option<PathBuf>,
    /// `drop` or `surface-fallback` for terms missing from the dictionary.
    #[arg(long)]
    pub fallback: Option<String>,
    #[arg(long)]
    pub perplexity: Option<f64>,
    #[arg(long)]
    pub iterations: Option<usize>,
    /// Maximum number of shared words projected with t-SNE.
    #[arg(long)]
    pub tsne_sample: Option<usize>,
    /// Skip the t-SNE projections.
    #[arg(long)]
    pub no_tsne: bool,
}

#[derive(Debug, Args)]
pub struct TaggerFlags {
    #[arg(long)]
    pub char_embedding_dim: Option<usize>,
    #[arg(long)]
    pub char_hidden: Option<usize>,
    #[arg(long)]
    pub token_hidden: Option<usize>,
    #[arg(long)]
    pub char_dropout: Option<f64>,
    #[arg(long)]
    pub token_dropout: Option<f64>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    #[arg(long)]
    pub learning_rate: Option<f64>,
    #[arg(long)]
    pub l2_strength: Option<f64>,
    /// `crf` or `softmax`.
    #[arg(long)]
    pub decoder: Option<String>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub train: PathBuf,
    #[arg(long)]
    pub dev: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub embedding: PathBuf,
    /// Add wall-clock seconds to the training log (makes it run-dependent).
    #[arg(long)]
    pub log_timing: bool,
    #[command(flatten)]
    pub tagger: TaggerFlags,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
    #[arg(long)]
    pub test: PathBuf,
    #[arg(long)]
    pub embedding: PathBuf,
}

#[derive(Debug, Args)]
pub struct QueryArgs {
    #[arg(long)]
    pub embedding: PathBuf,
    #[arg(long)]
    pub word: String,
    #[arg(short, long)]
    pub k: Option<usize>,
}

/// Parses `args` (including the program name) and runs the subcommand.
/// Returns the process exit code; diagnostics go to standard error.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { 0 };
        }
    };
    match commands::execute(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
