use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use repoctx_core::bench_gen::{read_dataset, reference_line_count};
use repoctx_core::index::load_index;
use repoctx_core::{LexicalTokenizer, Tokenizer};
use serde_json::Value;

fn fixture_repo(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/repos")
        .join(name)
}

fn repoctx(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_repoctx"))
        .args(args)
        .output()
        .expect("spawn repoctx")
}

fn ok(args: &[&str]) -> Value {
    let out = repoctx(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let stdout = String::from_utf8(out.stdout).unwrap();
    serde_json::from_str(stdout.lines().last().unwrap()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn index_round_trips_and_reports_counts() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("inv.jsonl");
    let repo = fixture_repo("inventory");
    let summary = ok(&["index", "--repo", s(&repo), "--out", s(&out)]);
    let index = load_index(&out).unwrap();
    assert_eq!(summary["candidates"].as_u64().unwrap() as usize, index.pool.len());
    assert_eq!(
        summary["abstracts"].as_u64().unwrap() + summary["snippets"].as_u64().unwrap(),
        summary["candidates"].as_u64().unwrap()
    );

    // Re-indexing gives the same ids and texts.
    let again = dir.path().join("inv2.jsonl");
    ok(&["index", "--repo", s(&repo), "--out", s(&again)]);
    assert_eq!(std::fs::read(&out).unwrap(), std::fs::read(&again).unwrap());
    let reloaded = load_index(&again).unwrap();
    let ids = |p: &repoctx_core::CandidatePool| -> Vec<(u32, String)> {
        p.candidates.iter().map(|c| (c.id, c.text.clone())).collect()
    };
    assert_eq!(ids(&index.pool), ids(&reloaded.pool));
}

#[test]
fn index_of_empty_directory_and_missing_path() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty");
    std::fs::create_dir(&empty).unwrap();
    let out = dir.path().join("e.jsonl");
    let summary = ok(&["index", "--repo", s(&empty), "--out", s(&out)]);
    assert_eq!(summary["candidates"], 0);

    let missing = repoctx(&["index", "--repo", s(&dir.path().join("nope")), "--out", s(&out)]);
    assert!(!missing.status.success());
    let err = String::from_utf8(missing.stderr).unwrap();
    assert_eq!(err.trim().lines().count(), 1);
    assert!(err.starts_with("error: "));
}

#[test]
fn complete_respects_budget_for_both_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let index = dir.path().join("ledger.jsonl");
    ok(&["index", "--repo", s(&fixture_repo("ledger")), "--out", s(&index)]);
    let file = "src/ledger/Ledger.java";
    for metric in ["jaccard", "bm25"] {
        let rec = ok(&[
            "complete", "--index", s(&index), "--file", file, "--line", "12", "--col", "4", "--metric", metric, "--n",
            "600",
        ]);
        let total = rec["total_tokens"].as_u64().unwrap() as usize;
        assert!(total <= 600);
        let text = format!(
            "{}{}{}",
            rec["crossfile_context"].as_str().unwrap(),
            rec["prefix"].as_str().unwrap(),
            rec["suffix"].as_str().unwrap()
        );
        assert!(LexicalTokenizer.count(&text) <= 600);
        assert_eq!(rec["file"], file);
        assert!(!rec["included"].as_array().unwrap().is_empty());
    }

    // Same cursor straight from the repository gives the same record.
    let from_repo = ok(&[
        "complete", "--repo", s(&fixture_repo("ledger")), "--file", file, "--line", "12", "--col", "4",
    ]);
    let from_index = ok(&["complete", "--index", s(&index), "--file", file, "--line", "12", "--col", "4"]);
    assert_eq!(from_repo, from_index);
}

#[test]
fn complete_rejects_unknown_file_and_bad_cursor() {
    let repo = fixture_repo("taskboard");
    let unknown = repoctx(&["complete", "--repo", s(&repo), "--file", "src/nope.ts", "--line", "1"]);
    assert!(!unknown.status.success());
    let bad = repoctx(&["complete", "--repo", s(&repo), "--file", "src/types.ts", "--line", "100000"]);
    assert!(!bad.status.success());
}

#[test]
fn gen_is_deterministic_and_filtered() {
    let dir = tempfile::tempdir().unwrap();
    let repos: Vec<PathBuf> = ["inventory", "ledger", "taskboard", "shipping"]
        .iter()
        .map(|r| fixture_repo(r))
        .collect();
    let run = |name: &str, extra: &[&str]| -> (PathBuf, Value) {
        let out = dir.path().join(name);
        let mut args = vec!["gen"];
        for r in &repos {
            args.extend(["--repo", s(r)]);
        }
        args.extend(["--out", s(&out), "--samples-per-file", "24"]);
        args.extend(extra);
        let summary = ok(&args);
        (out, summary)
    };
    let (a, summary) = run("a.jsonl", &["--seed", "7"]);
    let (b, _) = run("b.jsonl", &["--seed", "7"]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(
        std::fs::read(dir.path().join("a.rejections.jsonl")).unwrap(),
        std::fs::read(dir.path().join("b.rejections.jsonl")).unwrap()
    );
    assert_eq!(summary["seed"], 7);

    let tasks = read_dataset(&a).unwrap();
    assert!(!tasks.is_empty());
    let multi = tasks.iter().filter(|t| reference_line_count(&t.reference) >= 2).count();
    assert!(multi as f64 / tasks.len() as f64 > 0.30);
    let mut ids: Vec<&str> = tasks.iter().map(|t| t.task_id.as_str()).collect();
    assert!(ids.windows(2).all(|w| w[0] < w[1]), "sorted by task id");
    ids.dedup();
    assert_eq!(ids.len(), tasks.len());
    for t in &tasks {
        assert!(LexicalTokenizer.count(&t.reference) >= 10);
        assert!(reference_line_count(&t.reference) <= 5);
        let repo = fixture_repo(&t.repo);
        let original = std::fs::read_to_string(repo.join(&t.file)).unwrap();
        assert_eq!(format!("{}{}{}", t.prefix, t.reference, t.suffix), original);
    }

    let (none, _) = run("q0.jsonl", &["--seed", "7", "--q", "0"]);
    assert!(read_dataset(&none).unwrap().iter().all(|t| !t.perturbed));
}

#[test]
fn gen_uses_config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("gen.conf");
    std::fs::write(&conf, "# pinned run\nseed = 3\nq = 0.0\nsamples-per-file = 6\n").unwrap();
    let out = dir.path().join("g.jsonl");
    let repo = fixture_repo("inventory");
    let summary = ok(&["--config", s(&conf), "gen", "--repo", s(&repo), "--out", s(&out), "--seed", "5"]);
    assert_eq!(summary["seed"], 5);
    assert_eq!(summary["config"]["q"], 0.0);
    assert_eq!(summary["config"]["samples_per_file"], 6);

    std::fs::write(&conf, "window = 3\n").unwrap();
    let bad = repoctx(&["--config", s(&conf), "gen", "--repo", s(&repo), "--out", s(&out)]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn eval_echo_and_empty_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("d.jsonl");
    let mut args = vec!["gen", "--out", s(&data), "--seed", "1", "--samples-per-file", "24"];
    let repos: Vec<PathBuf> = ["inventory", "ledger"].iter().map(|r| fixture_repo(r)).collect();
    for r in &repos {
        args.extend(["--repo", s(r)]);
    }
    ok(&args);
    let tasks = read_dataset(&data).unwrap();

    let echo = dir.path().join("echo.jsonl");
    let lines: Vec<String> = tasks
        .iter()
        .map(|t| serde_json::json!({"task_id": t.task_id, "text": t.reference}).to_string())
        .collect();
    std::fs::write(&echo, lines.join("\n") + "\n").unwrap();
    let report_path = dir.path().join("report.json");
    let out = repoctx(&["eval", "--dataset", s(&data), "--predictions", s(&echo), "--out", s(&report_path)]);
    assert!(out.status.success());
    assert!(!out.stdout.is_empty());
    let report: Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report["average"]["em_pct"], 100.0);

    let empty = dir.path().join("empty.jsonl");
    std::fs::write(&empty, "").unwrap();
    let out = repoctx(&["eval", "--dataset", s(&data), "--predictions", s(&empty), "--out", s(&report_path)]);
    assert!(out.status.success());
    let report: Value = serde_json::from_slice(&std::fs::read(&report_path).unwrap()).unwrap();
    assert_eq!(report["average"]["em_pct"], 0.0);
}

#[test]
fn bench_reports_machine_note_and_rejects_zero_reps() {
    let dir = tempfile::tempdir().unwrap();
    let index = dir.path().join("ship.jsonl");
    ok(&["index", "--repo", s(&fixture_repo("shipping")), "--out", s(&index)]);
    for metric in ["jaccard", "bm25"] {
        let out = dir.path().join(format!("{metric}.json"));
        let result = ok(&[
            "bench", "--index", s(&index), "--metric", metric, "--reps", "2", "--warmup", "5", "--queries", "20", "--out",
            s(&out),
        ]);
        assert_eq!(result["metric"], metric);
        assert!(!result["machine_note"].as_str().unwrap().is_empty());
        assert!(out.is_file());
    }
    let zero = repoctx(&["bench", "--index", s(&index), "--reps", "0"]);
    assert_eq!(zero.status.code(), Some(2));
}

#[test]
fn defaults_are_the_published_settings() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.jsonl");
    let summary = ok(&["gen", "--repo", s(&fixture_repo("inventory")), "--out", s(&out)]);
    let c = &summary["config"];
    assert_eq!(c["snippet"]["window"], 10);
    assert_eq!(c["snippet"]["stride"], 5);
    assert_eq!(c["retrieval"]["prefix_lines"], 5);
    assert_eq!(c["retrieval"]["suffix_lines"], 5);
    assert_eq!(c["retrieval"]["abstract_slots"], 3);
    assert_eq!(c["retrieval"]["token_budget"], 4096);
    assert_eq!(c["retrieval"]["metric"], "jaccard");
    assert_eq!(c["q"], 0.1);
    assert_eq!(c["min_ref_tokens"], 10);
    assert_eq!(c["max_ref_lines"], 5);
    assert_eq!(c["multiline_quota"], 0.3);
    assert_eq!(c["seed"], 0);
}
