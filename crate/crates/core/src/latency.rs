//! Per-query retrieval latency measurement.
//!
//! Only `rank_candidates` is timed (scoring plus sort); pool construction and
//! I/O happen before the clock starts.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pool::CandidatePool;
use crate::retrieval::{rank_candidates, Metric, RetrievalConfig, RetrievalQuery};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchResult {
    pub metric: Metric,
    pub pool_size: usize,
    pub queries: usize,
    pub reps: usize,
    pub median_ms: f64,
    pub mean_ms: f64,
    pub p95_ms: f64,
    pub machine_note: String,
}

/// Describes the host so results from different machines are not compared
/// blindly.
pub fn machine_note() -> String {
    let cpu = std::fs::read_to_string("/proc/cpuinfo")
        .ok()
        .and_then(|info| {
            info.lines()
                .find(|l| l.starts_with("model name"))
                .and_then(|l| l.split(':').nth(1))
                .map(|s| s.trim().to_string())
        })
        .unwrap_or_else(|| "unknown cpu".into());
    let threads = std::thread::available_parallelism().map_or(1, |n| n.get());
    format!(
        "{cpu}; {threads} hw threads; {}-{}; single-threaded timing loop",
        std::env::consts::OS,
        std::env::consts::ARCH
    )
}

/// Nearest-rank percentile of sorted samples.
fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let rank = ((pct / 100.0) * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
    }
}

pub fn run_bench(
    pool: &CandidatePool,
    queries: &[RetrievalQuery],
    metric: Metric,
    warmup: usize,
    reps: usize,
) -> Result<BenchResult> {
    if queries.is_empty() {
        return Err(Error::EmptyInput("benchmark needs at least one query"));
    }
    if pool.is_empty() {
        return Err(Error::EmptyInput("benchmark needs a non-empty pool"));
    }
    if reps == 0 {
        return Err(Error::InvalidConfig("reps must be >= 1".into()));
    }
    let config = RetrievalConfig {
        metric,
        ..RetrievalConfig::default()
    };
    for query in queries.iter().cycle().take(warmup) {
        std::hint::black_box(rank_candidates(query, pool, &config));
    }

    let mut samples = Vec::with_capacity(queries.len() * reps);
    for _ in 0..reps {
        for query in queries {
            let start = Instant::now();
            let ranked = rank_candidates(std::hint::black_box(query), pool, &config);
            let elapsed = start.elapsed();
            std::hint::black_box(ranked);
            // Clock granularity can round tiny pools down to zero.
            samples.push((elapsed.as_secs_f64() * 1e3).max(1e-6));
        }
    }
    samples.sort_by(f64::total_cmp);
    let mean_ms = samples.iter().sum::<f64>() / samples.len() as f64;
    Ok(BenchResult {
        metric,
        pool_size: pool.len(),
        queries: queries.len(),
        reps,
        median_ms: median(&samples),
        mean_ms,
        p95_ms: percentile(&samples, 95.0),
        machine_note: machine_note(),
    })
}
