//! Token-budgeted prompt assembly.
//!
//! The cross-file block is built from the top-K abstracts followed by
//! snippets in descending score order, each rendered as a comment block. The
//! in-file prefix and suffix are reserved first; candidates are added whole
//! while they fit the remaining budget.

use serde::{Deserialize, Serialize};

use crate::corpus::{Cursor, Language, SourceFile};
use crate::error::Result;
use crate::pool::{Candidate, CandidatePool, ContextKind};
use crate::retrieval::{build_query, rank_candidates, RankedCandidate, RetrievalConfig};
use crate::tokenize::Tokenizer;

/// Renders a candidate as a comment block: a `Path:` header followed by every
/// candidate line behind the language's comment prefix.
pub fn format_cross_file_block(cand: &Candidate, language: Language) -> String {
    let prefix = language.comment_prefix();
    let mut out = format!("{prefix} Path: {}\n", cand.file_path);
    if !cand.text.is_empty() {
        let body = cand.text.strip_suffix('\n').unwrap_or(&cand.text);
        for line in body.split('\n') {
            out.push_str(prefix);
            out.push(' ');
            out.push_str(line);
            out.push('\n');
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IncludedCandidate {
    pub id: u32,
    pub kind: ContextKind,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PromptBundle {
    pub cross_file_text: String,
    pub prefix: String,
    pub suffix: String,
    /// Abstracts first, then snippets, each by descending score.
    pub included: Vec<IncludedCandidate>,
    pub total_tokens: usize,
    /// The in-file context alone exceeded the budget and was cut.
    pub in_file_truncated: bool,
}

/// Smallest `drop` in `0..=n` for which `fits(drop)` holds, assuming `fits`
/// is monotone in `drop`.
fn smallest_fitting_drop(n: usize, fits: impl Fn(usize) -> bool) -> usize {
    let (mut lo, mut hi) = (0, n);
    while lo < hi {
        let mid = (lo + hi) / 2;
        if fits(mid) {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    lo
}

/// Cuts the in-file context down to `budget` tokens: oldest prefix lines go
/// first, then trailing suffix lines once the prefix is empty.
fn fit_in_file(prefix: &str, suffix: &str, budget: usize, tokenizer: &dyn Tokenizer) -> (String, String) {
    let prefix_pieces: Vec<&str> = prefix.split_inclusive('\n').collect();
    let suffix_tokens = tokenizer.count(suffix);
    let tail_from = |drop: usize| prefix_pieces[drop..].concat();
    let drop = smallest_fitting_drop(prefix_pieces.len(), |d| {
        tokenizer.count(&tail_from(d)) + suffix_tokens <= budget
    });
    let prefix = tail_from(drop);
    if tokenizer.count(&prefix) + suffix_tokens <= budget {
        return (prefix, suffix.to_string());
    }
    let suffix_pieces: Vec<&str> = suffix.split_inclusive('\n').collect();
    let head_until = |drop: usize| suffix_pieces[..suffix_pieces.len() - drop].concat();
    let drop = smallest_fitting_drop(suffix_pieces.len(), |d| tokenizer.count(&head_until(d)) <= budget);
    (String::new(), head_until(drop))
}

pub fn assemble_prompt(
    prefix: &str,
    suffix: &str,
    ranked: &[RankedCandidate],
    pool: &CandidatePool,
    language: Language,
    config: &RetrievalConfig,
    tokenizer: &dyn Tokenizer,
) -> PromptBundle {
    let budget = config.token_budget;
    let in_file = tokenizer.count(prefix) + tokenizer.count(suffix);
    if in_file > budget {
        let (prefix, suffix) = fit_in_file(prefix, suffix, budget, tokenizer);
        let total_tokens = tokenizer.count(&prefix) + tokenizer.count(&suffix);
        return PromptBundle {
            cross_file_text: String::new(),
            prefix,
            suffix,
            included: Vec::new(),
            total_tokens,
            in_file_truncated: true,
        };
    }

    let mut remaining = budget - in_file;
    let mut blocks: Vec<String> = Vec::new();
    let mut included = Vec::new();
    let mut try_add = |r: &RankedCandidate, remaining: &mut usize| {
        let cand = &pool.candidates[r.candidate_id as usize];
        let block = format_cross_file_block(cand, language);
        let slack = if blocks.is_empty() { 0 } else { tokenizer.join_slack() };
        let cost = tokenizer.count(&block) + slack;
        if cost <= *remaining {
            *remaining -= cost;
            blocks.push(block);
            included.push(IncludedCandidate {
                id: r.candidate_id,
                kind: r.kind,
                score: r.score,
            });
        }
    };

    for r in ranked
        .iter()
        .filter(|r| r.kind == ContextKind::Abstract)
        .take(config.abstract_slots)
    {
        try_add(r, &mut remaining);
    }
    for r in ranked.iter().filter(|r| r.kind == ContextKind::Snippet) {
        if remaining == 0 {
            break;
        }
        try_add(r, &mut remaining);
    }

    if config.nearest_last {
        blocks.reverse();
    }
    let cross_file_text = blocks.concat();
    let total_tokens = tokenizer.count(&cross_file_text) + in_file;
    PromptBundle {
        cross_file_text,
        prefix: prefix.to_string(),
        suffix: suffix.to_string(),
        included,
        total_tokens,
        in_file_truncated: false,
    }
}

/// Query, rank and assemble for a cursor in `file`, whose own candidates are
/// excluded from retrieval.
pub fn complete_at(
    file: &SourceFile,
    cursor: Cursor,
    pool: &CandidatePool,
    config: &RetrievalConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<PromptBundle> {
    config.validate()?;
    let offset = file.locate_cursor(cursor)?;
    let query = build_query(file, cursor, config.prefix_lines, config.suffix_lines, tokenizer)?;
    let ranked = rank_candidates(&query, pool, config);
    let (prefix, suffix) = file.text.split_at(offset);
    Ok(assemble_prompt(prefix, suffix, &ranked, pool, file.language, config, tokenizer))
}

/// JSON record emitted by the `complete` command.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompletionRecord {
    pub repo: String,
    pub file: String,
    pub cursor: Cursor,
    pub crossfile_context: String,
    pub prefix: String,
    pub suffix: String,
    pub included: Vec<IncludedCandidate>,
    pub total_tokens: usize,
}

impl CompletionRecord {
    pub fn new(repo: &str, file: &str, cursor: Cursor, bundle: PromptBundle) -> Self {
        CompletionRecord {
            repo: repo.into(),
            file: file.into(),
            cursor,
            crossfile_context: bundle.cross_file_text,
            prefix: bundle.prefix,
            suffix: bundle.suffix,
            included: bundle.included,
            total_tokens: bundle.total_tokens,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pool::{PoolEntry, SnippetConfig};
    use crate::tokenize::LexicalTokenizer;

    fn cand(kind: ContextKind, path: &str, text: &str) -> Candidate {
        let pool = CandidatePool::from_contexts(
            vec![PoolEntry {
                kind,
                file_path: path.into(),
                span: None,
                text: text.into(),
            }],
            &LexicalTokenizer,
            SnippetConfig::default(),
        );
        pool.candidates.into_iter().next().unwrap()
    }

    #[test]
    fn block_format() {
        let c = cand(ContextKind::Snippet, "util/a.py", "line1\nline2");
        assert_eq!(
            format_cross_file_block(&c, Language::Python),
            "# Path: util/a.py\n# line1\n# line2\n"
        );
        let c = cand(ContextKind::Abstract, "A.java", "class A {\n  int f()\n");
        assert_eq!(
            format_cross_file_block(&c, Language::Java),
            "// Path: A.java\n// class A {\n//   int f()\n"
        );
        let c = cand(ContextKind::Snippet, "e.py", "");
        assert_eq!(format_cross_file_block(&c, Language::Python), "# Path: e.py\n");
    }

    fn pool_of(entries: &[(ContextKind, &str, &str)]) -> CandidatePool {
        CandidatePool::from_contexts(
            entries
                .iter()
                .map(|(kind, path, text)| PoolEntry {
                    kind: *kind,
                    file_path: path.to_string(),
                    span: Some((1, 1)),
                    text: text.to_string(),
                })
                .collect(),
            &LexicalTokenizer,
            SnippetConfig::default(),
        )
    }

    fn ranked_by(pool: &CandidatePool, scores: &[f64]) -> Vec<RankedCandidate> {
        let mut ranked: Vec<_> = pool
            .candidates
            .iter()
            .zip(scores)
            .map(|(c, &score)| RankedCandidate {
                candidate_id: c.id,
                score,
                kind: c.kind,
            })
            .collect();
        crate::retrieval::sort_ranked(&mut ranked);
        ranked
    }

    #[test]
    fn no_pressure_includes_everything_in_order() {
        use ContextKind::*;
        let pool = pool_of(&[
            (Abstract, "a.py", "def a():"),
            (Snippet, "a.py", "a()"),
            (Abstract, "b.py", "def b():"),
            (Snippet, "b.py", "b()"),
            (Abstract, "c.py", "def c():"),
            (Abstract, "d.py", "def d():"),
        ]);
        let ranked = ranked_by(&pool, &[0.9, 0.2, 0.5, 0.7, 0.1, 0.3]);
        let config = RetrievalConfig::default();
        let bundle = assemble_prompt("x = ", "\n", &ranked, &pool, Language::Python, &config, &LexicalTokenizer);
        let ids: Vec<_> = bundle.included.iter().map(|i| i.id).collect();
        // abstracts a(0.9), b(0.5), d(0.3); snippets b(0.7), a(0.2)
        assert_eq!(ids, [0, 2, 5, 3, 1]);
        assert!(bundle.cross_file_text.starts_with("# Path: a.py\n# def a():\n"));
        assert_eq!(bundle.prefix, "x = ");
        let expected = LexicalTokenizer.count(&bundle.cross_file_text) + 2;
        assert_eq!(bundle.total_tokens, expected);
    }

    #[test]
    fn zero_headroom_includes_nothing() {
        let pool = pool_of(&[(ContextKind::Snippet, "a.py", "a()")]);
        let ranked = ranked_by(&pool, &[1.0]);
        let config = RetrievalConfig {
            token_budget: 4,
            ..RetrievalConfig::default()
        };
        let bundle = assemble_prompt("x = 1", "y", &ranked, &pool, Language::Python, &config, &LexicalTokenizer);
        assert!(bundle.included.is_empty());
        assert!(bundle.cross_file_text.is_empty());
        assert_eq!(bundle.total_tokens, 4);
        assert!(!bundle.in_file_truncated);
    }

    #[test]
    fn oversized_in_file_drops_oldest_prefix_lines() {
        let pool = pool_of(&[(ContextKind::Snippet, "a.py", "a()")]);
        let ranked = ranked_by(&pool, &[1.0]);
        let config = RetrievalConfig {
            token_budget: 5,
            ..RetrievalConfig::default()
        };
        let prefix = "a b\nc d\ne f\n";
        let bundle = assemble_prompt(prefix, "g", &ranked, &pool, Language::Python, &config, &LexicalTokenizer);
        assert_eq!(bundle.prefix, "c d\ne f\n");
        assert_eq!(bundle.suffix, "g");
        assert!(bundle.included.is_empty());
        assert!(bundle.in_file_truncated);
        assert_eq!(bundle.total_tokens, 5);

        let bundle = assemble_prompt(prefix, "g h i\nj k\n", &ranked, &pool, Language::Python, &RetrievalConfig { token_budget: 3, ..config }, &LexicalTokenizer);
        assert_eq!(bundle.prefix, "");
        assert_eq!(bundle.suffix, "g h i\n");
    }

    #[test]
    fn skipped_snippets_make_room_for_smaller_ones() {
        use ContextKind::*;
        let pool = pool_of(&[
            (Snippet, "a.py", "one two three four five six seven eight"),
            (Snippet, "b.py", "small"),
        ]);
        let ranked = ranked_by(&pool, &[0.9, 0.1]);
        // header "# Path: b.py" = 6 tokens, body "# small" = 2
        let config = RetrievalConfig {
            token_budget: 10,
            ..RetrievalConfig::default()
        };
        let bundle = assemble_prompt("x", "", &ranked, &pool, Language::Python, &config, &LexicalTokenizer);
        let ids: Vec<_> = bundle.included.iter().map(|i| i.id).collect();
        assert_eq!(ids, [1]);
        assert_eq!(bundle.total_tokens, 9);
    }

    #[test]
    fn nearest_last_reverses_rendering_only() {
        use ContextKind::*;
        let pool = pool_of(&[(Snippet, "a.py", "a"), (Snippet, "b.py", "b")]);
        let ranked = ranked_by(&pool, &[0.9, 0.1]);
        let config = RetrievalConfig {
            nearest_last: true,
            ..RetrievalConfig::default()
        };
        let bundle = assemble_prompt("", "", &ranked, &pool, Language::Python, &config, &LexicalTokenizer);
        assert_eq!(bundle.cross_file_text, "# Path: b.py\n# b\n# Path: a.py\n# a\n");
        assert_eq!(bundle.included[0].id, 0);
    }
}
