//! Query construction around a cursor and lexical ranking of pool candidates.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::{Cursor, SourceFile};
use crate::error::{Error, Result};
use crate::pool::{Candidate, CandidatePool, ContextKind};
use crate::tokenize::Tokenizer;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Metric {
    #[default]
    Jaccard,
    Bm25,
}

impl FromStr for Metric {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jaccard" => Ok(Metric::Jaccard),
            "bm25" => Ok(Metric::Bm25),
            other => Err(Error::InvalidConfig(format!("unknown metric {other:?}"))),
        }
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Metric::Jaccard => "jaccard",
            Metric::Bm25 => "bm25",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RetrievalConfig {
    /// Query lines taken before the cursor (P).
    pub prefix_lines: usize,
    /// Query lines taken from the cursor onwards (S).
    pub suffix_lines: usize,
    pub metric: Metric,
    /// Abstract slots in the assembled prompt (K).
    pub abstract_slots: usize,
    /// Prompt token budget (N).
    pub token_budget: usize,
    pub bm25_k1: f64,
    pub bm25_b: f64,
    /// Render the cross-file block in ascending score order so the best
    /// candidate sits next to the in-file context.
    pub nearest_last: bool,
}

impl Default for RetrievalConfig {
    fn default() -> Self {
        RetrievalConfig {
            prefix_lines: 5,
            suffix_lines: 5,
            metric: Metric::Jaccard,
            abstract_slots: 3,
            token_budget: 4096,
            bm25_k1: 1.2,
            bm25_b: 0.75,
            nearest_last: false,
        }
    }
}

impl RetrievalConfig {
    pub fn validate(&self) -> Result<()> {
        if self.prefix_lines + self.suffix_lines == 0 {
            return Err(Error::InvalidConfig("query needs at least one line (P + S >= 1)".into()));
        }
        if self.token_budget == 0 {
            return Err(Error::InvalidConfig("token budget N must be >= 1".into()));
        }
        if !(self.bm25_k1 >= 0.0 && (0.0..=1.0).contains(&self.bm25_b)) {
            return Err(Error::InvalidConfig("bm25 requires k1 >= 0 and b in [0, 1]".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RetrievalQuery {
    pub origin_file: String,
    pub cursor: Cursor,
    /// 1-based number of the first query line.
    pub first_line: usize,
    pub lines: Vec<String>,
    pub token_set: BTreeSet<String>,
    pub token_multiset: BTreeMap<String, usize>,
}

impl RetrievalQuery {
    /// Builds a query from raw lines, bypassing window selection.
    pub fn from_lines(
        origin_file: impl Into<String>,
        cursor: Cursor,
        first_line: usize,
        lines: Vec<String>,
        tokenizer: &dyn Tokenizer,
    ) -> Self {
        let mut token_multiset = BTreeMap::new();
        for token in tokenizer.tokenize(&lines.join("\n")) {
            *token_multiset.entry(token).or_insert(0) += 1;
        }
        RetrievalQuery {
            origin_file: origin_file.into(),
            cursor,
            first_line,
            lines,
            token_set: token_multiset.keys().cloned().collect(),
            token_multiset,
        }
    }

    pub fn line_count(&self) -> usize {
        self.lines.len()
    }
}

/// Inclusive 1-based line window of the query around `cursor`.
///
/// The prefix is the `prefix_lines` lines before the cursor line, or ending
/// with it when the cursor is mid-line; the suffix is the `suffix_lines`
/// lines starting at the cursor line. A shared cursor line is counted once.
/// Returns `None` when the window is empty.
pub fn query_window(line_count: usize, cursor: Cursor, prefix_lines: usize, suffix_lines: usize) -> Option<(usize, usize)> {
    let line = cursor.line as isize;
    let (p, s) = (prefix_lines as isize, suffix_lines as isize);
    let prefix_end = if cursor.column > 0 { line } else { line - 1 };
    let mut lo = isize::MAX;
    let mut hi = isize::MIN;
    if p > 0 {
        lo = lo.min(prefix_end - p + 1);
        hi = hi.max(prefix_end);
    }
    if s > 0 {
        lo = lo.min(line);
        hi = hi.max(line + s - 1);
    }
    let lo = lo.max(1);
    let hi = hi.min(line_count as isize);
    (lo <= hi).then_some((lo as usize, hi as usize))
}

pub fn build_query(
    file: &SourceFile,
    cursor: Cursor,
    prefix_lines: usize,
    suffix_lines: usize,
    tokenizer: &dyn Tokenizer,
) -> Result<RetrievalQuery> {
    file.locate_cursor(cursor)?;
    let (first_line, lines) = match query_window(file.line_count(), cursor, prefix_lines, suffix_lines) {
        Some((lo, hi)) => (lo, file.lines[lo - 1..hi].to_vec()),
        None => (cursor.line, Vec::new()),
    };
    Ok(RetrievalQuery::from_lines(
        file.path.clone(),
        cursor,
        first_line,
        lines,
        tokenizer,
    ))
}

/// `|a ∩ b| / |a ∪ b|`, or 0 when both sets are empty.
pub fn jaccard<T: Ord>(a: &BTreeSet<T>, b: &BTreeSet<T>) -> f64 {
    let inter = a.intersection(b).count();
    let union = a.len() + b.len() - inter;
    if union == 0 {
        0.0
    } else {
        inter as f64 / union as f64
    }
}

/// A query mapped onto the pool vocabulary.
struct CompiledQuery {
    /// Known term ids, sorted.
    terms: Vec<u32>,
    /// Distinct query tokens absent from the pool.
    unknown: usize,
}

impl CompiledQuery {
    fn new(query: &RetrievalQuery, pool: &CandidatePool) -> Self {
        let mut terms = Vec::with_capacity(query.token_set.len());
        let mut unknown = 0;
        for token in &query.token_set {
            match pool.term_id(token) {
                Some(term) => terms.push(term),
                None => unknown += 1,
            }
        }
        terms.sort_unstable();
        CompiledQuery { terms, unknown }
    }

    fn distinct(&self) -> usize {
        self.terms.len() + self.unknown
    }

    fn jaccard(&self, cand: &Candidate) -> f64 {
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        let ct = &cand.terms;
        while i < self.terms.len() && j < ct.len() {
            match self.terms[i].cmp(&ct[j].0) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = self.distinct() + ct.len() - inter;
        if union == 0 {
            0.0
        } else {
            inter as f64 / union as f64
        }
    }
}

fn bm25_idf(total: usize, df: usize) -> f64 {
    let (n, df) = (total as f64, df as f64);
    (1.0 + (n - df + 0.5) / (df + 0.5)).ln()
}

fn bm25_term(tf: f64, idf: f64, len_ratio: f64, k1: f64, b: f64) -> f64 {
    idf * (tf * (k1 + 1.0)) / (tf + k1 * (1.0 - b + b * len_ratio))
}

/// Okapi BM25 of `cand` for the distinct tokens of `query`, with the
/// non-negative `ln(1 + ...)` idf.
pub fn bm25_score(query: &RetrievalQuery, cand: &Candidate, pool: &CandidatePool, k1: f64, b: f64) -> f64 {
    let compiled = CompiledQuery::new(query, pool);
    let idfs: Vec<f64> = compiled
        .terms
        .iter()
        .map(|&t| bm25_idf(pool.len(), pool.term_doc_freq(t) as usize))
        .collect();
    bm25_compiled(&compiled, &idfs, cand, pool.avg_token_count, k1, b)
}

fn bm25_compiled(q: &CompiledQuery, idfs: &[f64], cand: &Candidate, avg_len: f64, k1: f64, b: f64) -> f64 {
    let len_ratio = if avg_len > 0.0 {
        cand.token_count as f64 / avg_len
    } else {
        1.0
    };
    let mut score = 0.0;
    for (term, idf) in q.terms.iter().zip(idfs) {
        if let Ok(idx) = cand.terms.binary_search_by_key(term, |&(t, _)| t) {
            score += bm25_term(cand.terms[idx].1 as f64, *idf, len_ratio, k1, b);
        }
    }
    score
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RankedCandidate {
    pub candidate_id: u32,
    pub score: f64,
    pub kind: ContextKind,
}

/// Scores every candidate outside the query's own file and sorts them by
/// score descending, ties by id ascending. Zero scores are kept.
pub fn rank_candidates(query: &RetrievalQuery, pool: &CandidatePool, config: &RetrievalConfig) -> Vec<RankedCandidate> {
    let compiled = CompiledQuery::new(query, pool);
    let idfs: Vec<f64> = match config.metric {
        Metric::Bm25 => compiled
            .terms
            .iter()
            .map(|&t| bm25_idf(pool.len(), pool.term_doc_freq(t) as usize))
            .collect(),
        Metric::Jaccard => Vec::new(),
    };
    let mut ranked: Vec<RankedCandidate> = pool
        .candidates
        .iter()
        .filter(|c| c.file_path != query.origin_file)
        .map(|c| {
            let score = match config.metric {
                Metric::Jaccard => compiled.jaccard(c),
                Metric::Bm25 => bm25_compiled(&compiled, &idfs, c, pool.avg_token_count, config.bm25_k1, config.bm25_b),
            };
            RankedCandidate {
                candidate_id: c.id,
                score,
                kind: c.kind,
            }
        })
        .collect();
    sort_ranked(&mut ranked);
    ranked
}

pub(crate) fn sort_ranked(ranked: &mut [RankedCandidate]) {
    ranked.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then(a.candidate_id.cmp(&b.candidate_id))
    });
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::Language;
    use crate::pool::{PoolEntry, SnippetConfig};
    use crate::tokenize::LexicalTokenizer;
    use proptest::prelude::*;

    fn set(items: &[&str]) -> BTreeSet<String> {
        items.iter().map(|s| s.to_string()).collect()
    }

    fn twenty_lines() -> SourceFile {
        let text: String = (1..=20).map(|i| format!("v{i} = {i}\n")).collect();
        SourceFile::new("q.py", Language::Python, text)
    }

    #[test]
    fn jaccard_examples() {
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["a", "b", "c"])), 1.0);
        assert_eq!(jaccard(&set(&["a", "b"]), &set(&["c", "d"])), 0.0);
        assert_eq!(jaccard(&set(&["a", "b", "c"]), &set(&["b", "c", "d"])), 0.5);
        assert_eq!(jaccard(&set(&[]), &set(&[])), 0.0);
    }

    #[test]
    fn query_shapes() {
        let file = twenty_lines();
        let t = LexicalTokenizer;
        let q = build_query(&file, Cursor::new(10, 4), 5, 5, &t).unwrap();
        assert_eq!((q.first_line, q.line_count()), (6, 9));
        let q = build_query(&file, Cursor::new(10, 0), 5, 5, &t).unwrap();
        assert_eq!((q.first_line, q.line_count()), (5, 10));
        let q = build_query(&file, Cursor::new(2, 0), 5, 5, &t).unwrap();
        assert_eq!((q.first_line, q.line_count()), (1, 6));
        let q = build_query(&file, Cursor::new(21, 0), 5, 5, &t).unwrap();
        assert_eq!((q.first_line, q.line_count()), (16, 5));
        assert!(build_query(&file, Cursor::new(30, 0), 5, 5, &t).is_err());
    }

    #[test]
    fn one_sided_queries() {
        assert_eq!(query_window(20, Cursor::new(10, 3), 0, 5), Some((10, 14)));
        assert_eq!(query_window(20, Cursor::new(10, 3), 5, 0), Some((6, 10)));
        assert_eq!(query_window(20, Cursor::new(10, 0), 5, 0), Some((5, 9)));
        assert_eq!(query_window(20, Cursor::new(1, 0), 5, 0), None);
    }

    #[test]
    fn query_tokens_are_counted() {
        let file = SourceFile::new("q.py", Language::Python, "a = a + b\n");
        let q = build_query(&file, Cursor::new(1, 0), 5, 5, &LexicalTokenizer).unwrap();
        assert_eq!(q.token_multiset["a"], 2);
        assert_eq!(q.token_set, set(&["+", "=", "a", "b"]));
    }

    fn toy_pool() -> CandidatePool {
        let entry = |path: &str, text: &str| PoolEntry {
            kind: ContextKind::Snippet,
            file_path: path.into(),
            span: Some((1, 1)),
            text: text.into(),
        };
        CandidatePool::from_contexts(
            vec![
                entry("a.py", "alpha beta beta"),
                entry("b.py", "beta gamma"),
                entry("c.py", "gamma gamma gamma delta"),
            ],
            &LexicalTokenizer,
            SnippetConfig::default(),
        )
    }

    fn query_of(origin: &str, text: &str) -> RetrievalQuery {
        RetrievalQuery::from_lines(origin, Cursor::new(1, 0), 1, vec![text.into()], &LexicalTokenizer)
    }

    #[test]
    fn bm25_idf_for_singleton_token() {
        let idf = bm25_idf(3, 1);
        assert!((idf - (8.0f64 / 3.0).ln()).abs() < 1e-15);
        assert!((idf - 0.98083).abs() < 1e-5);
    }

    #[test]
    fn bm25_zero_without_overlap() {
        let pool = toy_pool();
        let q = query_of("x.py", "omega");
        for c in &pool.candidates {
            assert_eq!(bm25_score(&q, c, &pool, 1.2, 0.75), 0.0);
        }
    }

    #[test]
    fn ranking_excludes_origin_file_and_breaks_ties_by_id() {
        let pool = toy_pool();
        let q = query_of("b.py", "delta alpha");
        let ranked = rank_candidates(&q, &pool, &RetrievalConfig::default());
        assert_eq!(ranked.len(), 2);
        assert!(ranked.iter().all(|r| pool.candidates[r.candidate_id as usize].file_path != "b.py"));
        // "alpha beta" vs {delta, alpha}: 1/3; "gamma delta" vs {delta, alpha}: 1/3.
        assert_eq!(ranked[0].score, ranked[1].score);
        assert!(ranked[0].candidate_id < ranked[1].candidate_id);
    }

    #[test]
    fn rejects_bad_configs() {
        let bad = RetrievalConfig {
            prefix_lines: 0,
            suffix_lines: 0,
            ..RetrievalConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = RetrievalConfig {
            token_budget: 0,
            ..RetrievalConfig::default()
        };
        assert!(bad.validate().is_err());
        assert_eq!("BM25".parse::<Metric>().unwrap(), Metric::Bm25);
        assert!("cosine".parse::<Metric>().is_err());
    }

    proptest! {
        #[test]
        fn jaccard_symmetric_and_reflexive(
            a in prop::collection::btree_set(0u8..20, 0..10),
            b in prop::collection::btree_set(0u8..20, 0..10),
        ) {
            prop_assert_eq!(jaccard(&a, &b), jaccard(&b, &a));
            if !a.is_empty() {
                prop_assert_eq!(jaccard(&a, &a), 1.0);
            }
            let j = jaccard(&a, &b);
            prop_assert!((0.0..=1.0).contains(&j));
        }

        #[test]
        fn adding_a_shared_token_never_lowers_jaccard(
            q in prop::collection::btree_set(0u8..20, 1..10),
            c in prop::collection::btree_set(0u8..20, 0..10),
            pick in any::<prop::sample::Index>(),
        ) {
            let shared = *q.iter().nth(pick.index(q.len())).unwrap();
            let mut grown = c.clone();
            grown.insert(shared);
            prop_assert!(jaccard(&q, &grown) >= jaccard(&q, &c));
        }

        #[test]
        fn bm25_is_non_negative(words in prop::collection::vec("[a-d]{1,2}", 1..8)) {
            let pool = toy_pool();
            let q = query_of("z.py", &words.join(" "));
            for c in &pool.candidates {
                prop_assert!(bm25_score(&q, c, &pool, 1.2, 0.75) >= 0.0);
            }
        }
    }
}
