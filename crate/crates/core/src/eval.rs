//! Exact-match and edit-similarity scoring of prediction files.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::Language;
use crate::error::{Error, Result};

/// Trimmed string equality; interior whitespace is significant.
pub fn exact_match(pred: &str, reference: &str) -> bool {
    pred.trim() == reference.trim()
}

/// Unit-cost Levenshtein distance over Unicode scalar values.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// `1 - lev / max(len)` over trimmed strings; 1.0 when both are empty.
pub fn edit_similarity(pred: &str, reference: &str) -> f64 {
    let (p, r) = (pred.trim(), reference.trim());
    let longest = p.chars().count().max(r.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(p, r) as f64 / longest as f64
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Prediction {
    pub task_id: String,
    pub text: String,
}

/// The fields of a dataset record that scoring needs.
#[derive(Debug, Clone, PartialEq, Eq, Deserialize)]
pub struct ScoredTask {
    pub task_id: String,
    pub language: Language,
    pub reference: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LanguageScore {
    pub em_pct: f64,
    pub es_pct: f64,
    pub n: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AverageScore {
    pub em_pct: f64,
    pub es_pct: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub per_language: BTreeMap<Language, LanguageScore>,
    /// Unweighted mean over the languages present.
    pub average: AverageScore,
    pub missing_predictions: usize,
}

pub(crate) fn read_jsonl<T, R>(input: R, name: &str) -> Result<Vec<T>>
where
    T: serde::de::DeserializeOwned,
    R: Read,
{
    let mut out = Vec::new();
    for (idx, line) in BufReader::new(input).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::malformed(name, idx + 1, e))?);
    }
    Ok(out)
}

pub fn read_predictions<R: Read>(input: R, name: &str) -> Result<Vec<Prediction>> {
    read_jsonl(input, name)
}

pub fn score(tasks: &[ScoredTask], predictions: &[Prediction]) -> Result<EvalReport> {
    let known: HashMap<&str, &ScoredTask> = tasks.iter().map(|t| (t.task_id.as_str(), t)).collect();
    let mut by_task: HashMap<&str, &str> = HashMap::new();
    for p in predictions {
        if !known.contains_key(p.task_id.as_str()) {
            return Err(Error::UnknownTask(p.task_id.clone()));
        }
        if by_task.insert(&p.task_id, &p.text).is_some() {
            return Err(Error::DuplicatePrediction(p.task_id.clone()));
        }
    }

    // language -> (em hits, es sum, n)
    let mut sums: BTreeMap<Language, (usize, f64, usize)> = BTreeMap::new();
    let mut missing = 0;
    for task in tasks {
        let entry = sums.entry(task.language).or_insert((0, 0.0, 0));
        entry.2 += 1;
        match by_task.get(task.task_id.as_str()) {
            Some(pred) => {
                entry.0 += usize::from(exact_match(pred, &task.reference));
                entry.1 += edit_similarity(pred, &task.reference);
            }
            None => missing += 1,
        }
    }

    let per_language: BTreeMap<Language, LanguageScore> = sums
        .into_iter()
        .map(|(lang, (em, es, n))| {
            (
                lang,
                LanguageScore {
                    em_pct: 100.0 * em as f64 / n as f64,
                    es_pct: 100.0 * es / n as f64,
                    n,
                },
            )
        })
        .collect();
    let langs = per_language.len().max(1) as f64;
    let average = AverageScore {
        em_pct: per_language.values().map(|s| s.em_pct).sum::<f64>() / langs,
        es_pct: per_language.values().map(|s| s.es_pct).sum::<f64>() / langs,
    };
    Ok(EvalReport {
        per_language,
        average,
        missing_predictions: missing,
    })
}

pub fn evaluate(dataset: impl AsRef<Path>, predictions: impl AsRef<Path>) -> Result<EvalReport> {
    let (dataset, predictions) = (dataset.as_ref(), predictions.as_ref());
    let tasks: Vec<ScoredTask> = read_jsonl(std::fs::File::open(dataset)?, &dataset.display().to_string())?;
    let preds = read_predictions(
        std::fs::File::open(predictions)?,
        &predictions.display().to_string(),
    )?;
    score(&tasks, &preds)
}

impl EvalReport {
    /// Fixed-width table: one EM/ES column pair per language plus Average.
    pub fn to_table(&self) -> String {
        let mut columns: Vec<(String, f64, f64)> = self
            .per_language
            .iter()
            .map(|(lang, s)| (lang.display_name().to_string(), s.em_pct, s.es_pct))
            .collect();
        columns.push(("Average".into(), self.average.em_pct, self.average.es_pct));

        let mut out = String::new();
        let _ = write!(out, "{:<8}", "");
        for (name, _, _) in &columns {
            let _ = write!(out, "{name:^15}");
        }
        out.push('\n');
        let _ = write!(out, "{:<8}", "");
        for _ in &columns {
            let _ = write!(out, "{:>7}{:>7} ", "EM", "ES");
        }
        out.push('\n');
        let _ = write!(out, "{:<8}", "score");
        for (_, em, es) in &columns {
            let _ = write!(out, "{em:>7.1}{es:>7.1} ");
        }
        out.push('\n');
        let _ = writeln!(out, "missing predictions: {}", self.missing_predictions);
        out
    }
}
