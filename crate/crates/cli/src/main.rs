mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Parser, Debug)]
#[command(name = "repoctx", version, about = "Repository context retrieval for code completion")]
struct Cli {
    /// key = value settings file; command-line flags take precedence.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Worker thread cap for parallel stages.
    #[arg(long, global = true)]
    jobs: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build and save the candidate pool of a repository.
    Index(IndexArgs),
    /// Assemble the prompt for one cursor position.
    Complete(CompleteArgs),
    /// Generate a completion benchmark dataset.
    Gen(GenArgs),
    /// Score predictions against a dataset.
    Eval(EvalArgs),
    /// Time candidate ranking over an index.
    Bench(BenchArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct PoolFlags {
    /// Snippet window in lines.
    #[arg(long)]
    pub m: Option<usize>,
    /// Lines between snippet starts.
    #[arg(long)]
    pub stride: Option<usize>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct RetrievalFlags {
    /// Similarity metric: jaccard or bm25.
    #[arg(long)]
    pub metric: Option<String>,
    /// Query lines before the cursor.
    #[arg(long)]
    pub p: Option<usize>,
    /// Query lines from the cursor on.
    #[arg(long)]
    pub s: Option<usize>,
    /// Abstract slots in the prompt.
    #[arg(long)]
    pub k: Option<usize>,
    /// Prompt token budget.
    #[arg(long)]
    pub n: Option<usize>,
}

#[derive(Args, Debug)]
pub struct IndexArgs {
    #[arg(long)]
    pub repo: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[command(flatten)]
    pub pool: PoolFlags,
}

#[derive(Args, Debug)]
pub struct CompleteArgs {
    /// Saved index; the repository is read from the root it records.
    #[arg(long, conflicts_with = "repo", required_unless_present = "repo")]
    pub index: Option<PathBuf>,
    #[arg(long)]
    pub repo: Option<PathBuf>,
    /// File path relative to the repository root.
    #[arg(long)]
    pub file: String,
    /// 1-based line.
    #[arg(long)]
    pub line: usize,
    /// 0-based character column.
    #[arg(long, default_value_t = 0)]
    pub col: usize,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    #[command(flatten)]
    pub pool: PoolFlags,
}

#[derive(Args, Debug)]
pub struct GenArgs {
    /// Repository roots; repeat for several.
    #[arg(long, required = true)]
    pub repo: Vec<PathBuf>,
    /// Dataset JSONL output.
    #[arg(long)]
    pub out: PathBuf,
    /// Rejection log output; defaults next to the dataset.
    #[arg(long)]
    pub rejections: Option<PathBuf>,
    /// Fraction of tasks whose ranking is perturbed.
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long = "r-low")]
    pub r_low: Option<f64>,
    #[arg(long = "r-high")]
    pub r_high: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Cursor positions sampled per file before filtering.
    #[arg(long = "samples-per-file")]
    pub samples_per_file: Option<usize>,
    /// Shell command used as the baseline completer (prompt JSON on stdin).
    #[arg(long = "baseline-cmd")]
    pub baseline_cmd: Option<String>,
    #[command(flatten)]
    pub retrieval: RetrievalFlags,
    #[command(flatten)]
    pub pool: PoolFlags,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    #[arg(long)]
    pub dataset: PathBuf,
    #[arg(long)]
    pub predictions: PathBuf,
    /// Also write the report as JSON here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    #[arg(long)]
    pub index: PathBuf,
    #[arg(long)]
    pub metric: Option<String>,
    /// Timed passes over the query set.
    #[arg(long)]
    pub reps: Option<usize>,
    /// Untimed queries run first.
    #[arg(long)]
    pub warmup: Option<usize>,
    /// Number of queries, drawn from the index's own snippets.
    #[arg(long)]
    pub queries: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Result JSON output; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match commands::run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            let usage = err.is::<commands::UsageError>();
            let message = format!("{err:#}").replace('\n', " ");
            eprintln!("error: {message}");
            ExitCode::from(if usage { 2 } else { 1 })
        }
    }
}
