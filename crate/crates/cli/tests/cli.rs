use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn novax(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_novax"))
        .current_dir(dir)
        .env_remove("NOVAX_OUT")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = novax(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn read(p: impl AsRef<Path>) -> String {
    fs::read_to_string(p.as_ref()).unwrap_or_else(|e| panic!("{}: {e}", p.as_ref().display()))
}

const GATES: [&str; 6] = ["--min-pool-oldest", "40", "--min-newer", "10", "--slice", "20"];

/// synth, plan, fill and eval into `dir/<tag>-*`.
fn pipeline(dir: &Path, tag: &str, workers: &str) -> PathBuf {
    let s = format!("{tag}-synth");
    let p = format!("{tag}-plan");
    let e = format!("{tag}-eval");
    ok(dir, &["synth", "--seed", "5", "--size", "60", "--out", &s]);
    let corpus = format!("{s}/corpus.jsonl");
    let tasks = format!("{s}/tasks.json");
    let mut args = vec![
        "plan", "--corpus", &corpus, "--tasks", &tasks, "--focal-count", "2", "--seed", "5", "--out", &p,
    ];
    args.extend(GATES);
    ok(dir, &args);
    let manifest = format!("{p}/manifest.json");
    ok(dir, &["synth", "--fill", &manifest, "--seed", "5", "--out", &s]);
    let plan = format!("{p}/plan.json");
    ok(dir, &["eval", "--plan", &plan, "--embeddings", &s, "--workers", workers, "--out", &e]);
    dir.join(e)
}

#[test]
fn synth_is_seeded_and_sized() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--seed", "1", "--size", "20", "--refs", "12", "--out", "a"]);
    ok(dir.path(), &["synth", "--seed", "1", "--size", "20", "--refs", "12", "--out", "b"]);
    ok(dir.path(), &["synth", "--seed", "2", "--size", "20", "--refs", "12", "--out", "c"]);
    let a = read(dir.path().join("a/corpus.jsonl"));
    assert_eq!(a, read(dir.path().join("b/corpus.jsonl")));
    assert_ne!(a, read(dir.path().join("c/corpus.jsonl")));
    let tagged = a.lines().filter(|l| l.contains("\"task\":\"eeg\"")).count();
    assert_eq!(tagged, 20);
    assert_eq!(read(dir.path().join("a/abstract-embed.jsonl")).lines().count(), a.lines().count());
    assert!(dir.path().join("a/title-embed.jsonl").exists());
}

#[test]
fn unknown_task_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["synth", "--size", "10", "--refs", "5", "--out", "s"]);
    let out = novax(dir.path(), &["plan", "--corpus", "s/corpus.jsonl", "--tasks", "basket weaving", "--out", "p"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown task"));
    assert!(read(dir.path().join("p/run.log")).contains("unknown task"));
}

#[test]
fn missing_inputs_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let out = novax(dir.path(), &["plan", "--corpus", "nope.jsonl", "--out", "p"]);
    assert_eq!(out.status.code(), Some(2));
    let out = novax(dir.path(), &["combine", "--results", "nope.jsonl", "--step", "0.05", "--out", "c"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_title_space_with_ftlof_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "3", "--size", "60", "--out", "s"]);
    ok(
        d,
        &[
            "plan", "--corpus", "s/corpus.jsonl", "--tasks", "s/tasks.json", "--focal-count", "1", "--metrics", "ftlof",
            "--checks", "ax1,ax4", "--out", "p",
        ],
    );
    fs::remove_file(d.join("s/title-embed.jsonl")).unwrap();
    let out = novax(d, &["eval", "--plan", "p/plan.json", "--embeddings", "s", "--out", "e"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("title-embed"));
}

#[test]
fn env_sets_default_output_dir() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_novax"))
        .current_dir(dir.path())
        .env("NOVAX_OUT", "from-env")
        .args(["synth", "--size", "10", "--refs", "5"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(dir.path().join("from-env/corpus.jsonl").exists());
}

#[test]
fn pipeline_is_byte_stable_across_runs_and_workers() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let a = pipeline(d, "a", "1");
    let b = pipeline(d, "b", "1");
    let c = pipeline(d, "c", "3");
    for name in ["plan.json", "manifest.json"] {
        let x = read(d.join("a-plan").join(name)).replace("a-synth", "X");
        assert_eq!(x, read(d.join("b-plan").join(name)).replace("b-synth", "X"), "{name}");
        assert_eq!(x, read(d.join("c-plan").join(name)).replace("c-synth", "X"), "{name}");
    }
    let results = read(a.join("results.jsonl"));
    assert_eq!(results, read(b.join("results.jsonl")));
    assert_eq!(results, read(c.join("results.jsonl")));

    // one row per (focal, metric, check), skips included
    assert_eq!(results.lines().count(), 6 * 2 * 4 * 9);

    for (src, out) in [("a-eval", "a-comb"), ("c-eval", "c-comb")] {
        let r = format!("{src}/results.jsonl");
        ok(d, &["combine", "--results", &r, "--mode", "global", "--ablate", "--out", out]);
    }
    assert_eq!(read(d.join("a-comb/weights.json")), read(d.join("c-comb/weights.json")));
    assert_eq!(read(d.join("a-comb/folds.md")), read(d.join("c-comb/folds.md")));
    let weights: serde_json::Value = serde_json::from_str(&read(d.join("a-comb/weights.json"))).unwrap();
    assert_eq!(weights["candidates"], 1771);
    assert_eq!(weights["ablation"].as_array().unwrap().len(), 4);
    assert!(read(d.join("a-comb/run.log")).contains("1771 candidates"));

    ok(d, &["combine", "--results", "a-eval/results.jsonl", "--mode", "per-axiom", "--out", "a-per"]);
    let per: serde_json::Value = serde_json::from_str(&read(d.join("a-per/weights.json"))).unwrap();
    let folds = per["folds"].as_array().unwrap();
    assert_eq!(folds.len(), 3);
    for f in folds {
        assert_eq!(f["per_check_weights"].as_object().unwrap().len(), 9);
    }

    let out = ok(d, &["report", "--results", "a-eval/results.jsonl", "--format", "md", "--out", "rep"]);
    let md = String::from_utf8(out.stdout).unwrap();
    assert_eq!(md, read(d.join("rep/table2.md")));
    assert_eq!(md.lines().count(), 2 + 16);
    let ftlof: Vec<&str> = md.lines().filter(|l| l.contains("FastTextLOF")).collect();
    assert_eq!(ftlof.len(), 4);
    for l in ftlof {
        let cells: Vec<&str> = l.split('|').map(str::trim).collect();
        assert_eq!((cells[5], cells[6]), ("—", "—"), "{l}");
    }
    ok(d, &["report", "--results", "a-eval/results.jsonl", "--format", "csv", "--out", "rep"]);
    assert!(read(d.join("rep/table2.csv")).starts_with("domain,metric,Ax1"));
}

#[test]
fn metric_override_limits_rows() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(d, &["synth", "--seed", "4", "--size", "60", "--out", "s"]);
    ok(
        d,
        &["plan", "--corpus", "s/corpus.jsonl", "--tasks", "s/tasks.json", "--focal-count", "1", "--checks", "ax1,ax4", "--out", "p"],
    );
    ok(d, &["eval", "--plan", "p/plan.json", "--embeddings", "s", "--metrics", "yin", "--out", "e"]);
    let rows = read(d.join("e/results.jsonl"));
    assert_eq!(rows.lines().count(), 6 * 2);
    assert!(rows.lines().all(|l| l.contains("\"metric\":\"yin\"")));
}
