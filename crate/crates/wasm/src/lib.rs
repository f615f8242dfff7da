//! Browser bindings: prompt assembly, context perturbation and completion
//! scoring over files pasted into the page.
//!
//! Parsing grammars do not build for wasm32, so the pool here holds snippet
//! contexts only.

use serde::{Deserialize, Serialize};
use wasm_bindgen::prelude::*;

use repoctx_core::bench_gen::{derived_rng, perturb_pool, GenConfig};
use repoctx_core::retrieval::build_query;
use repoctx_core::{
    assemble_prompt, build_pool, detect_language, edit_similarity, exact_match, levenshtein, rank_candidates,
    CandidatePool, Cursor, IncludedCandidate, LexicalTokenizer, Metric, RankedCandidate, Repository,
    RetrievalConfig, SnippetConfig, SourceFile,
};

#[derive(Debug, Deserialize)]
pub struct InputFile {
    pub path: String,
    pub text: String,
}

#[derive(Debug, Deserialize)]
pub struct Request {
    pub files: Vec<InputFile>,
    pub target: String,
    pub line: usize,
    #[serde(default)]
    pub column: usize,
    #[serde(default)]
    pub metric: Option<String>,
    #[serde(default)]
    pub budget: Option<usize>,
}

#[derive(Debug, Serialize)]
pub struct RankedView {
    pub id: u32,
    pub file: String,
    pub lines: (usize, usize),
    pub score: f64,
}

#[derive(Debug, Serialize)]
pub struct Assembled {
    pub query_lines: usize,
    pub pool_size: usize,
    pub ranked: Vec<RankedView>,
    pub included: Vec<IncludedCandidate>,
    pub total_tokens: usize,
    pub prompt: String,
}

#[derive(Debug, Serialize)]
pub struct Perturbed {
    pub r: f64,
    pub dropped: Vec<u32>,
    pub original: Assembled,
    pub perturbed: Assembled,
}

#[derive(Debug, Serialize, PartialEq)]
pub struct Score {
    pub exact_match: bool,
    pub edit_similarity: f64,
    pub levenshtein: usize,
}

struct Prepared {
    file: SourceFile,
    pool: CandidatePool,
    config: RetrievalConfig,
    cursor: Cursor,
}

fn prepare(request: &Request) -> Result<Prepared, String> {
    let mut files = Vec::new();
    for f in &request.files {
        let language = detect_language(&f.path).ok_or_else(|| format!("unsupported file type: {}", f.path))?;
        files.push(SourceFile::new(f.path.clone(), language, f.text.clone()));
    }
    let repo = Repository::from_files("demo", "", files);
    let file = repo
        .file(&request.target)
        .cloned()
        .ok_or_else(|| format!("no file named {}", request.target))?;
    let pool = build_pool(&repo, &[], SnippetConfig::default(), &LexicalTokenizer).map_err(|e| e.to_string())?;
    let defaults = RetrievalConfig::default();
    let metric = match request.metric.as_deref() {
        Some(m) => m.parse::<Metric>().map_err(|e| e.to_string())?,
        None => defaults.metric,
    };
    let config = RetrievalConfig {
        metric,
        token_budget: request.budget.unwrap_or(defaults.token_budget),
        ..defaults
    };
    config.validate().map_err(|e| e.to_string())?;
    Ok(Prepared {
        file,
        pool,
        config,
        cursor: Cursor::new(request.line, request.column),
    })
}

fn assemble_ranked(p: &Prepared, ranked: &[RankedCandidate], query_lines: usize) -> Result<Assembled, String> {
    let offset = p.file.locate_cursor(p.cursor).map_err(|e| e.to_string())?;
    let (prefix, suffix) = p.file.text.split_at(offset);
    let bundle = assemble_prompt(prefix, suffix, ranked, &p.pool, p.file.language, &p.config, &LexicalTokenizer);
    Ok(Assembled {
        query_lines,
        pool_size: p.pool.len(),
        ranked: ranked
            .iter()
            .map(|r| {
                let c = &p.pool.candidates[r.candidate_id as usize];
                RankedView {
                    id: r.candidate_id,
                    file: c.file_path.clone(),
                    lines: c.span.unwrap_or((0, 0)),
                    score: r.score,
                }
            })
            .collect(),
        included: bundle.included,
        total_tokens: bundle.total_tokens,
        prompt: format!("{}{}<CURSOR>{}", bundle.cross_file_text, bundle.prefix, bundle.suffix),
    })
}

fn rank(p: &Prepared) -> Result<(Vec<RankedCandidate>, usize), String> {
    let query = build_query(&p.file, p.cursor, p.config.prefix_lines, p.config.suffix_lines, &LexicalTokenizer)
        .map_err(|e| e.to_string())?;
    Ok((rank_candidates(&query, &p.pool, &p.config), query.line_count()))
}

pub fn assemble_json(request: &str) -> Result<String, String> {
    let request: Request = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let p = prepare(&request)?;
    let (ranked, lines) = rank(&p)?;
    let out = assemble_ranked(&p, &ranked, lines)?;
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

/// Drops the top `floor(r * len)` ranked candidates and reassembles.
pub fn perturb_json(request: &str, r: f64) -> Result<String, String> {
    if !(0.0..=1.0).contains(&r) {
        return Err(format!("R must be in [0, 1], got {r}"));
    }
    let request: Request = serde_json::from_str(request).map_err(|e| e.to_string())?;
    let p = prepare(&request)?;
    let (ranked, lines) = rank(&p)?;
    let forced = GenConfig {
        q: 1.0,
        r_low: r,
        r_high: r,
        ..GenConfig::default()
    };
    let (kept, _, _) = perturb_pool(&ranked, &mut derived_rng(0, &["demo"]), &forced);
    let dropped = ranked[..ranked.len() - kept.len()].iter().map(|c| c.candidate_id).collect();
    let out = Perturbed {
        r,
        dropped,
        original: assemble_ranked(&p, &ranked, lines)?,
        perturbed: assemble_ranked(&p, &kept, lines)?,
    };
    serde_json::to_string(&out).map_err(|e| e.to_string())
}

pub fn score_pair(prediction: &str, reference: &str) -> Score {
    Score {
        exact_match: exact_match(prediction, reference),
        edit_similarity: edit_similarity(prediction, reference),
        levenshtein: levenshtein(prediction.trim(), reference.trim()),
    }
}

#[wasm_bindgen]
pub fn assemble(request: &str) -> Result<String, JsValue> {
    assemble_json(request).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn perturb(request: &str, r: f64) -> Result<String, JsValue> {
    perturb_json(request, r).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen]
pub fn score(prediction: &str, reference: &str) -> Result<String, JsValue> {
    serde_json::to_string(&score_pair(prediction, reference)).map_err(|e| JsValue::from_str(&e.to_string()))
}
