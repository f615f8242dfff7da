#![allow(dead_code)]

use std::path::PathBuf;

use repoctx_core::bench_gen::prepare_repository;
use repoctx_core::{load_repository, CandidatePool, LexicalTokenizer, LoadOptions, Repository, SnippetConfig};

pub const REPOS: [&str; 4] = ["inventory", "ledger", "taskboard", "shipping"];

pub fn fixtures() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn repo(name: &str) -> Repository {
    load_repository(fixtures().join("repos").join(name), &LoadOptions::default()).unwrap()
}

pub fn pool_for(repo: &Repository) -> CandidatePool {
    prepare_repository(repo, SnippetConfig::default(), &LexicalTokenizer)
        .unwrap()
        .pool
}
