//! On-disk pool index.
//!
//! JSON Lines: one header object followed by one record per candidate in id
//! order. Term statistics are not stored; they are rebuilt on load.

use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::{CandidatePool, ContextKind, PoolEntry, SnippetConfig};
use crate::tokenize::tokenizer_by_id;

pub const INDEX_FORMAT: &str = "repoctx-index";
pub const INDEX_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexHeader {
    pub format: String,
    pub version: u32,
    pub m: usize,
    pub stride: usize,
    pub tokenizer: String,
    pub repo: String,
    pub root: String,
    pub candidates: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct IndexRecord {
    pub id: u32,
    pub kind: ContextKind,
    pub path: String,
    pub start_line: Option<usize>,
    pub end_line: Option<usize>,
    pub text: String,
}

/// A loaded index: the rebuilt pool plus the header it was stored with.
#[derive(Debug, Clone)]
pub struct PoolIndex {
    pub header: IndexHeader,
    pub pool: CandidatePool,
}

pub fn write_index<W: Write>(pool: &CandidatePool, repo_id: &str, root: &str, out: W) -> Result<()> {
    let mut out = BufWriter::new(out);
    let header = IndexHeader {
        format: INDEX_FORMAT.into(),
        version: INDEX_VERSION,
        m: pool.snippet_config.window,
        stride: pool.snippet_config.stride,
        tokenizer: pool.tokenizer_id.clone(),
        repo: repo_id.into(),
        root: root.into(),
        candidates: pool.len(),
    };
    serde_json::to_writer(&mut out, &header)?;
    out.write_all(b"\n")?;
    for c in &pool.candidates {
        let record = IndexRecord {
            id: c.id,
            kind: c.kind,
            path: c.file_path.clone(),
            start_line: c.span.map(|s| s.0),
            end_line: c.span.map(|s| s.1),
            text: c.text.clone(),
        };
        serde_json::to_writer(&mut out, &record)?;
        out.write_all(b"\n")?;
    }
    out.flush()?;
    Ok(())
}

pub fn save_index(pool: &CandidatePool, repo_id: &str, root: &str, path: impl AsRef<Path>) -> Result<()> {
    let file = std::fs::File::create(path)?;
    write_index(pool, repo_id, root, file)
}

pub fn read_index<R: Read>(input: R, name: &str) -> Result<PoolIndex> {
    let mut lines = BufReader::new(input).lines();
    let header_line = lines
        .next()
        .ok_or_else(|| Error::malformed(name, 1, "missing index header"))??;
    let header: IndexHeader =
        serde_json::from_str(&header_line).map_err(|e| Error::malformed(name, 1, e))?;
    if header.format != INDEX_FORMAT || header.version != INDEX_VERSION {
        return Err(Error::malformed(
            name,
            1,
            format!("unsupported index {} v{}", header.format, header.version),
        ));
    }
    let tokenizer = tokenizer_by_id(&header.tokenizer)
        .ok_or_else(|| Error::malformed(name, 1, format!("unknown tokenizer {}", header.tokenizer)))?;

    let mut entries = Vec::with_capacity(header.candidates);
    for (idx, line) in lines.enumerate() {
        let line_no = idx + 2;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record: IndexRecord = serde_json::from_str(&line).map_err(|e| Error::malformed(name, line_no, e))?;
        if record.id as usize != entries.len() {
            return Err(Error::malformed(
                name,
                line_no,
                format!("expected candidate id {}, found {}", entries.len(), record.id),
            ));
        }
        let span = match (record.start_line, record.end_line) {
            (Some(s), Some(e)) => Some((s, e)),
            _ => None,
        };
        entries.push(PoolEntry {
            kind: record.kind,
            file_path: record.path,
            span,
            text: record.text,
        });
    }
    if entries.len() != header.candidates {
        return Err(Error::malformed(
            name,
            entries.len() + 1,
            format!("header announces {} candidates, found {}", header.candidates, entries.len()),
        ));
    }
    let config = SnippetConfig {
        window: header.m,
        stride: header.stride,
    };
    let pool = CandidatePool::from_contexts(entries, tokenizer.as_ref(), config);
    Ok(PoolIndex { header, pool })
}

pub fn load_index(path: impl AsRef<Path>) -> Result<PoolIndex> {
    let path = path.as_ref();
    let file = std::fs::File::open(path)?;
    read_index(file, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tokenize::LexicalTokenizer;

    fn sample_pool() -> CandidatePool {
        let entries = vec![
            PoolEntry {
                kind: ContextKind::Snippet,
                file_path: "b.py".into(),
                span: Some((1, 2)),
                text: "x = 1\ny = \"é\"".into(),
            },
            PoolEntry {
                kind: ContextKind::Abstract,
                file_path: "a.py".into(),
                span: None,
                text: "def f(x):\n".into(),
            },
        ];
        CandidatePool::from_contexts(entries, &LexicalTokenizer, SnippetConfig::default())
    }

    #[test]
    fn round_trip_preserves_candidates() {
        let pool = sample_pool();
        let mut buf = Vec::new();
        write_index(&pool, "r", "/tmp/r", &mut buf).unwrap();
        let loaded = read_index(buf.as_slice(), "mem").unwrap();
        assert_eq!(loaded.header.repo, "r");
        assert_eq!(loaded.pool.candidates, pool.candidates);
        assert_eq!(loaded.pool.doc_freq_map(), pool.doc_freq_map());
    }

    #[test]
    fn malformed_records_name_their_line() {
        let pool = sample_pool();
        let mut buf = Vec::new();
        write_index(&pool, "r", "/tmp/r", &mut buf).unwrap();
        let mut text = String::from_utf8(buf).unwrap();
        text.push_str("{not json}\n");
        let err = read_index(text.as_bytes(), "idx").unwrap_err();
        assert!(err.to_string().starts_with("idx:4:"), "{err}");

        let err = read_index("".as_bytes(), "idx").unwrap_err();
        assert!(err.to_string().contains("missing index header"));
    }
}
