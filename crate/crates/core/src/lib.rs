//! Repository-level context retrieval for code completion.
//!
//! A repository is split into a candidate pool of per-file abstracts
//! (declaration signatures) and overlapping line snippets. Queries around a
//! cursor rank that pool by Jaccard or BM25 similarity, and the best
//! candidates are packed into a token-budgeted prompt. The same machinery
//! generates and scores completion benchmarks.

pub mod assembly;
pub mod bench_gen;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod index;
pub mod latency;
pub mod pool;
pub mod retrieval;
pub mod syntax;
pub mod tokenize;

pub use assembly::{assemble_prompt, complete_at, format_cross_file_block, CompletionRecord, IncludedCandidate, PromptBundle};
pub use corpus::{detect_language, load_repository, Cursor, Language, LoadOptions, Repository, SourceFile};
pub use error::{Error, Result};
pub use eval::{edit_similarity, evaluate, exact_match, levenshtein, EvalReport, Prediction};
pub use latency::{run_bench, BenchResult};
pub use pool::{build_pool, extract_snippets, Candidate, CandidatePool, ContextKind, PoolEntry, SnippetConfig};
pub use retrieval::{build_query, jaccard, rank_candidates, Metric, RankedCandidate, RetrievalConfig, RetrievalQuery};
pub use tokenize::{LexicalTokenizer, Tokenizer};
