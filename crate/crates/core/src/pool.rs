//! Snippet extraction and the candidate retrieval pool.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use serde::{Deserialize, Serialize};

use crate::corpus::{Repository, SourceFile};
use crate::error::{Error, Result};
use crate::syntax::AbstractContext;
use crate::tokenize::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ContextKind {
    Abstract,
    Snippet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetConfig {
    /// Lines per snippet window.
    pub window: usize,
    pub stride: usize,
}

impl Default for SnippetConfig {
    fn default() -> Self {
        SnippetConfig { window: 10, stride: 5 }
    }
}

impl SnippetConfig {
    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.stride == 0 {
            return Err(Error::InvalidConfig("snippet window and stride must be >= 1".into()));
        }
        if self.stride > self.window {
            return Err(Error::InvalidConfig(format!(
                "snippet stride {} exceeds window {}; lines between windows would never be retrievable",
                self.stride, self.window
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SnippetContext {
    pub file_path: String,
    pub start_line: usize,
    /// Inclusive.
    pub end_line: usize,
    pub text: String,
    pub source_kind: ContextKind,
}

fn window(file: &SourceFile, start: usize, end: usize) -> Option<SnippetContext> {
    let lines = &file.lines[start..end];
    if lines.iter().all(|l| l.trim().is_empty()) {
        return None;
    }
    Some(SnippetContext {
        file_path: file.path.clone(),
        start_line: start + 1,
        end_line: end,
        text: lines.join("\n"),
        source_kind: ContextKind::Snippet,
    })
}

/// Overlapping `window`-line snippets starting every `stride` lines.
///
/// A file no longer than the window yields one snippet. Windows consisting
/// only of blank lines are dropped.
pub fn extract_snippets(file: &SourceFile, window_lines: usize, stride: usize) -> Vec<SnippetContext> {
    assert!(window_lines >= 1 && stride >= 1, "window and stride must be >= 1");
    let n = file.lines.len();
    let mut out = Vec::new();
    let mut covered_to = 0;
    let mut start = 0;
    while start < n {
        let end = (start + window_lines).min(n);
        out.extend(window(file, start, end));
        covered_to = end;
        if end == n {
            break;
        }
        start += stride;
    }
    if n > 0 && covered_to < n {
        out.extend(window(file, n.saturating_sub(window_lines), n));
    }
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct Candidate {
    pub id: u32,
    pub kind: ContextKind,
    pub file_path: String,
    /// 1-based inclusive line span; `None` for abstracts.
    pub span: Option<(usize, usize)>,
    pub text: String,
    pub token_count: usize,
    /// Distinct term ids with their in-candidate frequency, sorted by id.
    pub(crate) terms: Vec<(u32, u32)>,
}

impl Candidate {
    pub fn distinct_terms(&self) -> usize {
        self.terms.len()
    }
}

/// Input record for [`CandidatePool::from_contexts`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolEntry {
    pub kind: ContextKind,
    pub file_path: String,
    pub span: Option<(usize, usize)>,
    pub text: String,
}

impl From<&AbstractContext> for PoolEntry {
    fn from(a: &AbstractContext) -> Self {
        PoolEntry {
            kind: ContextKind::Abstract,
            file_path: a.file_path.clone(),
            span: None,
            text: a.text.clone(),
        }
    }
}

impl From<SnippetContext> for PoolEntry {
    fn from(s: SnippetContext) -> Self {
        PoolEntry {
            kind: ContextKind::Snippet,
            file_path: s.file_path,
            span: Some((s.start_line, s.end_line)),
            text: s.text,
        }
    }
}

/// Immutable retrieval pool with interned term statistics.
#[derive(Debug, Clone)]
pub struct CandidatePool {
    pub candidates: Vec<Candidate>,
    pub avg_token_count: f64,
    pub by_file: BTreeMap<String, Vec<u32>>,
    pub tokenizer_id: String,
    pub snippet_config: SnippetConfig,
    vocab: HashMap<String, u32>,
    terms: Vec<String>,
    doc_freq: Vec<u32>,
}

impl CandidatePool {
    /// Builds a pool from arbitrary contexts. Entries are ordered by
    /// (file path, kind, start line) before ids are assigned, so identical
    /// inputs always produce identical ids.
    pub fn from_contexts(
        mut entries: Vec<PoolEntry>,
        tokenizer: &dyn Tokenizer,
        snippet_config: SnippetConfig,
    ) -> CandidatePool {
        entries.sort_by(|a, b| {
            (&a.file_path, a.kind, a.span.map(|s| s.0))
                .cmp(&(&b.file_path, b.kind, b.span.map(|s| s.0)))
        });

        let mut vocab: HashMap<String, u32> = HashMap::new();
        let mut terms: Vec<String> = Vec::new();
        let mut doc_freq: Vec<u32> = Vec::new();
        let mut by_file: BTreeMap<String, Vec<u32>> = BTreeMap::new();
        let mut candidates = Vec::with_capacity(entries.len());
        let mut total_tokens = 0usize;

        for (idx, entry) in entries.into_iter().enumerate() {
            let id = idx as u32;
            let tokens = tokenizer.tokenize(&entry.text);
            let mut counts: BTreeMap<u32, u32> = BTreeMap::new();
            for token in &tokens {
                let term = match vocab.get(token.as_str()) {
                    Some(&term) => term,
                    None => {
                        let term = terms.len() as u32;
                        vocab.insert(token.clone(), term);
                        terms.push(token.clone());
                        doc_freq.push(0);
                        term
                    }
                };
                *counts.entry(term).or_insert(0) += 1;
            }
            for &term in counts.keys() {
                doc_freq[term as usize] += 1;
            }
            total_tokens += tokens.len();
            by_file.entry(entry.file_path.clone()).or_default().push(id);
            candidates.push(Candidate {
                id,
                kind: entry.kind,
                file_path: entry.file_path,
                span: entry.span,
                text: entry.text,
                token_count: tokens.len(),
                terms: counts.into_iter().collect(),
            });
        }

        let avg_token_count = if candidates.is_empty() {
            0.0
        } else {
            total_tokens as f64 / candidates.len() as f64
        };
        CandidatePool {
            candidates,
            avg_token_count,
            by_file,
            tokenizer_id: tokenizer.id().to_string(),
            snippet_config,
            vocab,
            terms,
            doc_freq,
        }
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn get(&self, id: u32) -> Option<&Candidate> {
        self.candidates.get(id as usize)
    }

    /// Number of candidates containing `token`.
    pub fn doc_freq(&self, token: &str) -> usize {
        self.vocab
            .get(token)
            .map_or(0, |&term| self.doc_freq[term as usize] as usize)
    }

    /// The full document-frequency map.
    pub fn doc_freq_map(&self) -> BTreeMap<&str, usize> {
        self.terms
            .iter()
            .zip(&self.doc_freq)
            .map(|(t, &df)| (t.as_str(), df as usize))
            .collect()
    }

    pub fn term_id(&self, token: &str) -> Option<u32> {
        self.vocab.get(token).copied()
    }

    pub(crate) fn term_doc_freq(&self, term: u32) -> u32 {
        self.doc_freq[term as usize]
    }

    pub fn token_set(&self, candidate: &Candidate) -> BTreeSet<&str> {
        candidate
            .terms
            .iter()
            .map(|&(term, _)| self.terms[term as usize].as_str())
            .collect()
    }

    /// Occurrences of `token` in `candidate`.
    pub fn term_frequency(&self, candidate: &Candidate, token: &str) -> usize {
        self.term_id(token).map_or(0, |term| {
            candidate
                .terms
                .binary_search_by_key(&term, |&(t, _)| t)
                .map_or(0, |idx| candidate.terms[idx].1 as usize)
        })
    }

    pub fn count_kind(&self, kind: ContextKind) -> usize {
        self.candidates.iter().filter(|c| c.kind == kind).count()
    }
}

/// Builds the retrieval pool for `repo`: every non-empty abstract plus every
/// snippet of every file.
pub fn build_pool(
    repo: &Repository,
    abstracts: &[AbstractContext],
    config: SnippetConfig,
    tokenizer: &dyn Tokenizer,
) -> Result<CandidatePool> {
    config.validate()?;
    let mut entries: Vec<PoolEntry> = abstracts
        .iter()
        .filter(|a| !a.text.trim().is_empty())
        .map(PoolEntry::from)
        .collect();
    for file in &repo.files {
        entries.extend(
            extract_snippets(file, config.window, config.stride)
                .into_iter()
                .map(PoolEntry::from),
        );
    }
    Ok(CandidatePool::from_contexts(entries, tokenizer, config))
}
