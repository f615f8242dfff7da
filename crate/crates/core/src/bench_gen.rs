//! Completion benchmark generation.
//!
//! Cursors are sampled from syntax-tree nodes; the node text becomes the
//! reference and the rest of the file the in-file context. A seeded fraction
//! of tasks gets its retrieval ranking perturbed by discarding the top
//! candidates. Quality filters and a multi-line quota shape the final set.
//!
//! All randomness comes from ChaCha8 streams derived from the master seed and
//! a label (file path, task id), so output never depends on scheduling.

use std::collections::BTreeSet;
use std::io::{BufWriter, Read, Write};
use std::path::Path;
use std::process::{Command, Stdio};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::assembly::{assemble_prompt, IncludedCandidate};
use crate::corpus::{Cursor, Language, SourceFile};
use crate::error::{Error, Result};
use crate::eval::{exact_match, read_jsonl};
use crate::pool::{CandidatePool, SnippetConfig};
use crate::retrieval::{build_query, rank_candidates, RankedCandidate, RetrievalConfig};
use crate::syntax::{SyntaxNode, SyntaxTree};
use crate::tokenize::Tokenizer;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenConfig {
    /// Probability that a task is perturbed.
    pub q: f64,
    pub r_low: f64,
    pub r_high: f64,
    pub min_ref_tokens: usize,
    pub max_ref_lines: usize,
    pub multiline_quota: f64,
    pub seed: u64,
    pub samples_per_file: usize,
    pub retrieval: RetrievalConfig,
    pub snippet: SnippetConfig,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig {
            q: 0.10,
            r_low: 0.0,
            r_high: 0.5,
            min_ref_tokens: 10,
            max_ref_lines: 5,
            multiline_quota: 0.30,
            seed: 0,
            samples_per_file: 8,
            retrieval: RetrievalConfig::default(),
            snippet: SnippetConfig::default(),
        }
    }
}

impl GenConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.q) {
            return Err(Error::InvalidConfig(format!("q must be in [0, 1], got {}", self.q)));
        }
        if !(0.0 <= self.r_low && self.r_low <= self.r_high && self.r_high <= 1.0) {
            return Err(Error::InvalidConfig(format!(
                "need 0 <= r_low <= r_high <= 1, got [{}, {}]",
                self.r_low, self.r_high
            )));
        }
        if !(0.0..1.0).contains(&self.multiline_quota) {
            return Err(Error::InvalidConfig("multiline quota must be in [0, 1)".into()));
        }
        self.retrieval.validate()?;
        self.snippet.validate()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionTask {
    pub task_id: String,
    pub language: Language,
    pub repo: String,
    pub file: String,
    pub cursor: Cursor,
    pub crossfile_context: String,
    pub prefix: String,
    pub suffix: String,
    pub reference: String,
    pub perturbed: bool,
    #[serde(rename = "perturbation_R")]
    pub perturbation_r: Option<f64>,
    pub included: Vec<IncludedCandidate>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    TooShort,
    TooLong,
    SolvedByBaseline,
    MultilineQuota,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rejection {
    pub task_id: String,
    pub reason: RejectReason,
}

/// Seeded ChaCha8 stream for `label` under `seed`.
pub fn derived_rng(seed: u64, label: &[&str]) -> ChaCha8Rng {
    let mut hasher = Sha256::new();
    hasher.update(seed.to_le_bytes());
    for part in label {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    let digest: [u8; 32] = hasher.finalize().into();
    ChaCha8Rng::from_seed(digest)
}

pub fn task_id(repo: &str, file: &str, cursor: Cursor, end_byte: usize) -> String {
    let key = format!("{repo}\0{file}\0{}\0{}\0{end_byte}", cursor.line, cursor.column);
    let digest = Sha256::digest(key.as_bytes());
    digest[..8].iter().map(|b| format!("{b:02x}")).collect()
}

/// Number of lines a reference spans; a trailing newline does not open a
/// new line.
pub fn reference_line_count(reference: &str) -> usize {
    reference.lines().count().max(1)
}

fn is_literal_or_comment(kind: &str) -> bool {
    kind.contains("comment")
        || kind.contains("string")
        || matches!(kind, "character_literal" | "char_literal" | "text_block" | "escape_sequence")
}

/// Named, non-empty, non-root nodes that do not start inside a comment or a
/// string literal. Nodes sharing a byte span with an earlier node (a
/// statement wrapping a single expression, say) collapse into one entry.
pub fn eligible_nodes(tree: &SyntaxTree) -> Vec<&SyntaxNode> {
    fn walk<'a>(node: &'a SyntaxNode, seen: &mut BTreeSet<(usize, usize)>, out: &mut Vec<&'a SyntaxNode>) {
        for child in &node.children {
            if is_literal_or_comment(child.kind) {
                continue;
            }
            if child.is_named && !child.is_empty() && child.kind != "ERROR" && seen.insert(child.byte_span) {
                out.push(child);
            }
            walk(child, seen, out);
        }
    }
    let mut out = Vec::new();
    walk(&tree.root, &mut BTreeSet::new(), &mut out);
    out
}

/// Draws up to `count` distinct eligible nodes, returned in source order.
pub fn sample_cursors<'t, R: Rng + ?Sized>(
    tree: &'t SyntaxTree,
    rng: &mut R,
    count: usize,
) -> Vec<(Cursor, &'t SyntaxNode)> {
    let eligible = eligible_nodes(tree);
    let mut picked = rand::seq::index::sample(rng, eligible.len(), count.min(eligible.len())).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| (eligible[i].start, eligible[i])).collect()
}

/// A raw task for `node`: the node text is the reference, the text around it
/// the prefix and suffix. Retrieval fields are left empty.
pub fn make_task(repo: &str, file: &SourceFile, node: &SyntaxNode) -> CompletionTask {
    let (start, end) = node.byte_span;
    CompletionTask {
        task_id: task_id(repo, &file.path, node.start, end),
        language: file.language,
        repo: repo.into(),
        file: file.path.clone(),
        cursor: node.start,
        crossfile_context: String::new(),
        prefix: file.text[..start].to_string(),
        suffix: file.text[end..].to_string(),
        reference: file.text[start..end].to_string(),
        perturbed: false,
        perturbation_r: None,
        included: Vec::new(),
    }
}

/// With probability `q`, draws `R` from `[r_low, r_high]` and drops the first
/// `floor(R * len)` candidates. Always consumes the same number of draws.
pub fn perturb_pool<R: Rng + ?Sized>(
    ranked: &[RankedCandidate],
    rng: &mut R,
    config: &GenConfig,
) -> (Vec<RankedCandidate>, bool, Option<f64>) {
    let perturbed = rng.random_bool(config.q);
    let r = rng.random_range(config.r_low..=config.r_high);
    if !perturbed {
        return (ranked.to_vec(), false, None);
    }
    let drop = ((r * ranked.len() as f64).floor() as usize).min(ranked.len());
    (ranked[drop..].to_vec(), true, Some(r))
}

/// Query, rank, perturb and assemble for a raw task. The query is built on
/// the file with the reference cut out so the answer cannot leak into
/// retrieval.
pub fn attach_context(
    task: &mut CompletionTask,
    pool: &CandidatePool,
    config: &GenConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<()> {
    let masked = SourceFile::new(task.file.clone(), task.language, format!("{}{}", task.prefix, task.suffix));
    let retrieval = &config.retrieval;
    let query = build_query(&masked, task.cursor, retrieval.prefix_lines, retrieval.suffix_lines, tokenizer)?;
    let ranked = rank_candidates(&query, pool, retrieval);
    let mut rng = derived_rng(config.seed, &["perturb", &task.task_id]);
    let (ranked, perturbed, r) = perturb_pool(&ranked, &mut rng, config);
    let bundle = assemble_prompt(&task.prefix, &task.suffix, &ranked, pool, task.language, retrieval, tokenizer);
    task.crossfile_context = bundle.cross_file_text;
    task.included = bundle.included;
    task.perturbed = perturbed;
    task.perturbation_r = r;
    Ok(())
}

/// Something that completes a prompt, used to drop tasks a weak model already
/// solves.
pub trait BaselineCompleter: Sync {
    fn complete(&self, task: &CompletionTask) -> Result<String>;
}

#[derive(Serialize)]
struct BaselinePrompt<'a> {
    crossfile_context: &'a str,
    prefix: &'a str,
    suffix: &'a str,
}

/// Runs a shell command per task: the prompt goes to stdin as JSON
/// `{crossfile_context, prefix, suffix}`, the completion is read from stdout.
#[derive(Debug, Clone)]
pub struct ExternalCompleter {
    pub command: String,
}

impl BaselineCompleter for ExternalCompleter {
    fn complete(&self, task: &CompletionTask) -> Result<String> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(&self.command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::null())
            .spawn()?;
        let prompt = serde_json::to_vec(&BaselinePrompt {
            crossfile_context: &task.crossfile_context,
            prefix: &task.prefix,
            suffix: &task.suffix,
        })?;
        let mut stdin = child.stdin.take().expect("piped stdin");
        // A completer that exits without reading its input is not an error.
        let _ = stdin.write_all(&prompt);
        drop(stdin);
        let mut out = String::new();
        child.stdout.take().expect("piped stdout").read_to_string(&mut out)?;
        let status = child.wait()?;
        if !status.success() {
            return Err(Error::Io(std::io::Error::other(format!(
                "baseline command exited with {status}"
            ))));
        }
        Ok(out)
    }
}

#[derive(Debug, Default, Clone, PartialEq)]
pub struct FilterOutcome {
    pub kept: Vec<CompletionTask>,
    pub rejections: Vec<Rejection>,
    pub baseline_failures: usize,
}

pub fn apply_quality_filters(
    tasks: Vec<CompletionTask>,
    config: &GenConfig,
    tokenizer: &dyn Tokenizer,
    baseline: Option<&dyn BaselineCompleter>,
) -> FilterOutcome {
    let mut out = FilterOutcome::default();
    for task in tasks {
        let reason = if tokenizer.count(&task.reference) < config.min_ref_tokens {
            Some(RejectReason::TooShort)
        } else if reference_line_count(&task.reference) > config.max_ref_lines {
            Some(RejectReason::TooLong)
        } else if let Some(baseline) = baseline {
            match baseline.complete(&task) {
                Ok(pred) if exact_match(&pred, &task.reference) => Some(RejectReason::SolvedByBaseline),
                Ok(_) => None,
                Err(e) => {
                    log::warn!("baseline failed on {}: {e}", task.task_id);
                    out.baseline_failures += 1;
                    None
                }
            }
        } else {
            None
        };
        match reason {
            Some(reason) => out.rejections.push(Rejection {
                task_id: task.task_id,
                reason,
            }),
            None => out.kept.push(task),
        }
    }
    out
}

/// Randomly discards single-line tasks until the multi-line fraction is
/// strictly above `quota`. Multi-line tasks are never dropped. Returns the
/// surviving tasks (in input order) and the dropped ones.
pub fn enforce_multiline_quota<R: Rng + ?Sized>(
    tasks: Vec<CompletionTask>,
    rng: &mut R,
    quota: f64,
) -> (Vec<CompletionTask>, Vec<CompletionTask>) {
    let multi = tasks.iter().filter(|t| reference_line_count(&t.reference) >= 2).count();
    let single = tasks.len() - multi;
    // Largest k with multi / (multi + k) > quota.
    let mut keep_single = single;
    while keep_single > 0 && multi as f64 <= quota * (multi + keep_single) as f64 {
        keep_single -= 1;
    }
    if keep_single == single {
        return (tasks, Vec::new());
    }
    if multi == 0 {
        log::warn!("no multi-line references; the quota removes every task");
    }
    let mut single_idx: Vec<usize> = tasks
        .iter()
        .enumerate()
        .filter(|(_, t)| reference_line_count(&t.reference) < 2)
        .map(|(i, _)| i)
        .collect();
    single_idx.shuffle(rng);
    let dropped_idx: BTreeSet<usize> = single_idx[keep_single..].iter().copied().collect();
    let (mut kept, mut dropped) = (Vec::new(), Vec::new());
    for (i, task) in tasks.into_iter().enumerate() {
        if dropped_idx.contains(&i) {
            dropped.push(task);
        } else {
            kept.push(task);
        }
    }
    (kept, dropped)
}

/// Writes tasks as JSON Lines sorted by task id.
pub fn write_dataset<W: Write>(tasks: &[CompletionTask], out: W) -> Result<usize> {
    let mut sorted: Vec<&CompletionTask> = tasks.iter().collect();
    sorted.sort_by(|a, b| a.task_id.cmp(&b.task_id));
    let mut out = BufWriter::new(out);
    for task in &sorted {
        serde_json::to_writer(&mut out, task)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(sorted.len())
}

pub fn emit_dataset(tasks: &[CompletionTask], path: impl AsRef<Path>) -> Result<usize> {
    write_dataset(tasks, std::fs::File::create(path)?)
}

pub fn read_dataset(path: impl AsRef<Path>) -> Result<Vec<CompletionTask>> {
    let path = path.as_ref();
    read_jsonl(std::fs::File::open(path)?, &path.display().to_string())
}

pub fn write_rejections<W: Write>(rejections: &[Rejection], out: W) -> Result<()> {
    let mut sorted: Vec<&Rejection> = rejections.iter().collect();
    sorted.sort_by(|a, b| a.task_id.cmp(&b.task_id).then(a.reason.cmp(&b.reason)));
    let mut out = BufWriter::new(out);
    for r in sorted {
        serde_json::to_writer(&mut out, r)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

#[cfg(feature = "parsing")]
pub use pipeline::{generate, generate_raw, prepare_repository, GenOutput, PreparedRepo};

#[cfg(feature = "parsing")]
mod pipeline {
    use rayon::prelude::*;

    use super::*;
    use crate::corpus::Repository;
    use crate::pool::build_pool;
    use crate::syntax::{extract_abstract, SourceParser};

    /// A repository with its parsed trees and retrieval pool.
    pub struct PreparedRepo<'r> {
        pub repo: &'r Repository,
        pub trees: Vec<SyntaxTree>,
        pub pool: CandidatePool,
    }

    pub fn prepare_repository<'r>(
        repo: &'r Repository,
        snippet: SnippetConfig,
        tokenizer: &dyn Tokenizer,
    ) -> Result<PreparedRepo<'r>> {
        let trees: Vec<SyntaxTree> = repo
            .files
            .par_iter()
            .map_init(SourceParser::new, |parser, file| parser.parse(file))
            .collect::<Result<_>>()?;
        let abstracts: Vec<_> = repo
            .files
            .iter()
            .zip(&trees)
            .map(|(file, tree)| extract_abstract(tree, file))
            .collect();
        let pool = build_pool(repo, &abstracts, snippet, tokenizer)?;
        Ok(PreparedRepo { repo, trees, pool })
    }

    /// Every sampled task of one repository, before filtering.
    pub fn generate_raw(
        prepared: &PreparedRepo<'_>,
        config: &GenConfig,
        tokenizer: &dyn Tokenizer,
    ) -> Result<Vec<CompletionTask>> {
        let repo = prepared.repo;
        let per_file: Vec<Vec<CompletionTask>> = repo
            .files
            .par_iter()
            .zip(&prepared.trees)
            .map(|(file, tree)| {
                let mut rng = derived_rng(config.seed, &["cursors", &repo.id, &file.path]);
                sample_cursors(tree, &mut rng, config.samples_per_file)
                    .into_iter()
                    .map(|(_, node)| {
                        let mut task = make_task(&repo.id, file, node);
                        attach_context(&mut task, &prepared.pool, config, tokenizer)?;
                        Ok(task)
                    })
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<_>>()?;
        Ok(per_file.into_iter().flatten().collect())
    }

    #[derive(Debug, Clone, Default)]
    pub struct GenOutput {
        /// Final tasks sorted by task id.
        pub tasks: Vec<CompletionTask>,
        pub rejections: Vec<Rejection>,
        pub raw_count: usize,
        pub baseline_failures: usize,
    }

    pub fn generate(
        repos: &[Repository],
        config: &GenConfig,
        tokenizer: &dyn Tokenizer,
        baseline: Option<&dyn BaselineCompleter>,
    ) -> Result<GenOutput> {
        config.validate()?;
        let mut raw = Vec::new();
        for repo in repos {
            let prepared = prepare_repository(repo, config.snippet, tokenizer)?;
            raw.extend(generate_raw(&prepared, config, tokenizer)?);
        }
        raw.sort_by(|a, b| a.task_id.cmp(&b.task_id));
        raw.dedup_by(|a, b| a.task_id == b.task_id);
        let raw_count = raw.len();

        let filtered = apply_quality_filters(raw, config, tokenizer, baseline);
        let mut rejections = filtered.rejections;
        let mut rng = derived_rng(config.seed, &["multiline-quota"]);
        let (tasks, dropped) = enforce_multiline_quota(filtered.kept, &mut rng, config.multiline_quota);
        rejections.extend(dropped.into_iter().map(|t| Rejection {
            task_id: t.task_id,
            reason: RejectReason::MultilineQuota,
        }));
        Ok(GenOutput {
            tasks,
            rejections,
            raw_count,
            baseline_failures: filtered.baseline_failures,
        })
    }
}
