use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::Serialize;

use repoctx_core::bench_gen::{
    derived_rng, generate, prepare_repository, reference_line_count, write_dataset, write_rejections,
    BaselineCompleter, ExternalCompleter, GenConfig,
};
use repoctx_core::index::{load_index, save_index};
use repoctx_core::tokenize::tokenizer_by_id;
use repoctx_core::{
    complete_at, detect_language, evaluate, load_repository, run_bench, CandidatePool, CompletionRecord, ContextKind,
    Cursor, LoadOptions, Metric, RetrievalConfig, RetrievalQuery, SnippetConfig, SourceFile, Tokenizer,
};

use crate::config::ConfigFile;
use crate::{BenchArgs, Cli, Command, CompleteArgs, EvalArgs, GenArgs, IndexArgs, PoolFlags, RetrievalFlags};

/// Bad invocation rather than a failure while running; exits with status 2.
#[derive(Debug)]
pub struct UsageError(pub String);

impl std::fmt::Display for UsageError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for UsageError {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    UsageError(msg.into()).into()
}

pub fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(path) => ConfigFile::load(path).map_err(|e| usage(format!("{e:#}")))?,
        None => ConfigFile::default(),
    };
    if let Some(jobs) = config.resolve_opt(cli.jobs, "jobs")? {
        if jobs == 0 {
            return Err(usage("--jobs must be >= 1"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("configuring worker pool")?;
    }
    match cli.command {
        Command::Index(args) => cmd_index(args, &config),
        Command::Complete(args) => cmd_complete(args, &config),
        Command::Gen(args) => cmd_gen(args, &config),
        Command::Eval(args) => cmd_eval(args),
        Command::Bench(args) => cmd_bench(args, &config),
    }
}

fn tokenizer(config: &ConfigFile) -> Result<Box<dyn Tokenizer>> {
    let id: String = config.resolve(None, "tokenizer", "lexical".to_string())?;
    tokenizer_by_id(&id).ok_or_else(|| usage(format!("unknown tokenizer {id:?}")))
}

fn metric(flag: Option<&str>, config: &ConfigFile) -> Result<Metric> {
    let flag = flag
        .map(|m| m.parse::<Metric>().map_err(|e| usage(e.to_string())))
        .transpose()?;
    config.resolve(flag, "metric", Metric::Jaccard)
}

fn snippet_config(flags: &PoolFlags, config: &ConfigFile) -> Result<SnippetConfig> {
    let defaults = SnippetConfig::default();
    let snippet = SnippetConfig {
        window: config.resolve(flags.m, "m", defaults.window)?,
        stride: config.resolve(flags.stride, "stride", defaults.stride)?,
    };
    snippet.validate().map_err(|e| usage(e.to_string()))?;
    Ok(snippet)
}

fn retrieval_config(flags: &RetrievalFlags, config: &ConfigFile) -> Result<RetrievalConfig> {
    let defaults = RetrievalConfig::default();
    let retrieval = RetrievalConfig {
        prefix_lines: config.resolve(flags.p, "p", defaults.prefix_lines)?,
        suffix_lines: config.resolve(flags.s, "s", defaults.suffix_lines)?,
        abstract_slots: config.resolve(flags.k, "k", defaults.abstract_slots)?,
        token_budget: config.resolve(flags.n, "n", defaults.token_budget)?,
        metric: metric(flags.metric.as_deref(), config)?,
        ..defaults
    };
    retrieval.validate().map_err(|e| usage(e.to_string()))?;
    Ok(retrieval)
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    let file = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    Ok(BufWriter::new(file))
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    serde_json::to_writer(&mut out, value)?;
    writeln!(out)?;
    Ok(())
}

#[derive(Serialize)]
struct IndexSummary<'a> {
    repo: &'a str,
    files: usize,
    abstracts: usize,
    snippets: usize,
    candidates: usize,
    out: String,
}

fn cmd_index(args: IndexArgs, config: &ConfigFile) -> Result<()> {
    let snippet = snippet_config(&args.pool, config)?;
    let tokenizer = tokenizer(config)?;
    let repo = load_repository(&args.repo, &LoadOptions::default())?;
    let pool = prepare_repository(&repo, snippet, tokenizer.as_ref())?.pool;
    save_index(&pool, &repo.id, &repo.root.display().to_string(), &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    print_json(&IndexSummary {
        repo: &repo.id,
        files: repo.files.len(),
        abstracts: pool.count_kind(ContextKind::Abstract),
        snippets: pool.count_kind(ContextKind::Snippet),
        candidates: pool.len(),
        out: args.out.display().to_string(),
    })
}

fn cmd_complete(args: CompleteArgs, config: &ConfigFile) -> Result<()> {
    let retrieval = retrieval_config(&args.retrieval, config)?;
    let tokenizer = tokenizer(config)?;
    let cursor = Cursor::new(args.line, args.col);
    let (repo_id, file, pool) = match (&args.index, &args.repo) {
        (Some(index_path), _) => {
            let index = load_index(index_path)?;
            let root = PathBuf::from(&index.header.root);
            let language = detect_language(&args.file)
                .ok_or_else(|| repoctx_core::Error::UnsupportedLanguage(args.file.clone()))?;
            let on_disk = root.join(&args.file);
            if !on_disk.is_file() {
                return Err(repoctx_core::Error::UnknownFile(args.file.clone()).into());
            }
            let text = String::from_utf8_lossy(&std::fs::read(&on_disk)?).into_owned();
            let file = SourceFile::new(args.file.clone(), language, text);
            (index.header.repo, file, index.pool)
        }
        (None, Some(repo_path)) => {
            let snippet = snippet_config(&args.pool, config)?;
            let repo = load_repository(repo_path, &LoadOptions::default())?;
            let file = repo
                .file(&args.file)
                .cloned()
                .ok_or_else(|| repoctx_core::Error::UnknownFile(args.file.clone()))?;
            let pool = prepare_repository(&repo, snippet, tokenizer.as_ref())?.pool;
            (repo.id.clone(), file, pool)
        }
        (None, None) => return Err(usage("complete needs --index or --repo")),
    };
    let bundle = complete_at(&file, cursor, &pool, &retrieval, tokenizer.as_ref())?;
    print_json(&CompletionRecord::new(&repo_id, &file.path, cursor, bundle))
}

fn rejection_log_path(out: &Path) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    out.with_file_name(format!("{stem}.rejections.jsonl"))
}

#[derive(Serialize)]
struct GenSummary {
    seed: u64,
    repos: Vec<String>,
    raw_tasks: usize,
    emitted: usize,
    perturbed: usize,
    multiline_fraction: f64,
    rejections: BTreeMap<String, usize>,
    baseline_failures: usize,
    dataset: String,
    rejection_log: String,
    config: GenConfig,
}

fn cmd_gen(args: GenArgs, config: &ConfigFile) -> Result<()> {
    let defaults = GenConfig::default();
    let gen = GenConfig {
        q: config.resolve(args.q, "q", defaults.q)?,
        r_low: config.resolve(args.r_low, "r-low", defaults.r_low)?,
        r_high: config.resolve(args.r_high, "r-high", defaults.r_high)?,
        seed: config.resolve(args.seed, "seed", defaults.seed)?,
        samples_per_file: config.resolve(args.samples_per_file, "samples-per-file", defaults.samples_per_file)?,
        retrieval: retrieval_config(&args.retrieval, config)?,
        snippet: snippet_config(&args.pool, config)?,
        ..defaults
    };
    gen.validate().map_err(|e| usage(e.to_string()))?;
    let tokenizer = tokenizer(config)?;
    let baseline_cmd: Option<String> = config.resolve_opt(args.baseline_cmd, "baseline-cmd")?;
    let external = baseline_cmd.map(|command| ExternalCompleter { command });
    let baseline = external.as_ref().map(|b| b as &dyn BaselineCompleter);

    let repos = args
        .repo
        .iter()
        .map(|root| load_repository(root, &LoadOptions::default()))
        .collect::<repoctx_core::Result<Vec<_>>>()?;
    let output = generate(&repos, &gen, tokenizer.as_ref(), baseline)?;

    let mut out = create(&args.out)?;
    let emitted = write_dataset(&output.tasks, &mut out)?;
    out.flush()?;
    let log_path = args.rejections.clone().unwrap_or_else(|| rejection_log_path(&args.out));
    write_rejections(&output.rejections, create(&log_path)?)?;

    let mut reasons = BTreeMap::new();
    for r in &output.rejections {
        let key = serde_json::to_value(r.reason)?.as_str().unwrap_or_default().to_string();
        *reasons.entry(key).or_insert(0) += 1;
    }
    let multi = output
        .tasks
        .iter()
        .filter(|t| reference_line_count(&t.reference) >= 2)
        .count();
    print_json(&GenSummary {
        seed: gen.seed,
        repos: repos.iter().map(|r| r.id.clone()).collect(),
        raw_tasks: output.raw_count,
        emitted,
        perturbed: output.tasks.iter().filter(|t| t.perturbed).count(),
        multiline_fraction: if emitted == 0 { 0.0 } else { multi as f64 / emitted as f64 },
        rejections: reasons,
        baseline_failures: output.baseline_failures,
        dataset: args.out.display().to_string(),
        rejection_log: log_path.display().to_string(),
        config: gen,
    })
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let report = evaluate(&args.dataset, &args.predictions)?;
    print!("{}", report.to_table());
    if let Some(path) = &args.out {
        let mut out = create(path)?;
        serde_json::to_writer_pretty(&mut out, &report)?;
        writeln!(out)?;
        out.flush()?;
    }
    Ok(())
}

/// Ten-line queries taken from the index's own snippets, each charged to the
/// snippet's file so that file is excluded exactly as at completion time.
fn snippet_queries(pool: &CandidatePool, count: usize, seed: u64, tokenizer: &dyn Tokenizer) -> Vec<RetrievalQuery> {
    let snippets: Vec<_> = pool
        .candidates
        .iter()
        .filter(|c| c.kind == ContextKind::Snippet)
        .collect();
    let mut rng = derived_rng(seed, &["bench-queries"]);
    let mut picked = rand::seq::index::sample(&mut rng, snippets.len(), count.min(snippets.len())).into_vec();
    picked.sort_unstable();
    picked
        .into_iter()
        .map(|i| {
            let c = snippets[i];
            let start = c.span.map_or(1, |s| s.0);
            let lines = c.text.split('\n').map(str::to_string).collect();
            RetrievalQuery::from_lines(c.file_path.clone(), Cursor::new(start, 0), start, lines, tokenizer)
        })
        .collect()
}

fn cmd_bench(args: BenchArgs, config: &ConfigFile) -> Result<()> {
    let reps: usize = config.resolve(args.reps, "reps", 5)?;
    if reps == 0 {
        return Err(usage("--reps must be >= 1"));
    }
    let warmup: usize = config.resolve(args.warmup, "warmup", 50)?;
    let count: usize = config.resolve(args.queries, "queries", 200)?;
    let seed: u64 = config.resolve(args.seed, "seed", 0)?;
    let metric = metric(args.metric.as_deref(), config)?;
    let index = load_index(&args.index)?;
    let tokenizer = tokenizer(config)?;
    let queries = snippet_queries(&index.pool, count, seed, tokenizer.as_ref());
    if queries.is_empty() {
        bail!("index {} has no snippets to draw queries from", args.index.display());
    }
    let result = run_bench(&index.pool, &queries, metric, warmup, reps)?;
    match &args.out {
        Some(path) => {
            let mut out = create(path)?;
            serde_json::to_writer_pretty(&mut out, &result)?;
            writeln!(out)?;
            out.flush()?;
            print_json(&result)
        }
        None => print_json(&result),
    }
}
