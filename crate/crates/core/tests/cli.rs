mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::fixture;

fn augbench(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_augbench")).args(args).output().unwrap()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn usage_errors_exit_1() {
    assert_eq!(augbench(&[]).status.code(), Some(1));
    assert_eq!(augbench(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(augbench(&["analyze", "--corpus", "x", "--order", "4"]).status.code(), Some(1));
    assert_eq!(augbench(&["--help"]).status.code(), Some(0));
}

#[test]
fn data_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, "{\"stars\":0,\"text\":\"x\"}\n").unwrap();
    let out = augbench(&["ingest", "--input", p(&bad), "--out", p(&dir.path().join("o.jsonl"))]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stars out of range") && err.contains("line 1"), "{err}");

    let out = augbench(&["train", "--corpus", "/nonexistent.jsonl", "--out", p(&dir.path().join("m.json"))]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn ingest_train_evaluate_compare_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let d = |name: &str| dir.path().join(name);

    let out = augbench(&[
        "--format", "json", "ingest", "--input", p(&fixture("pizza_reviews.csv")),
        "--holdout", "198", "--test-out", p(&d("test.jsonl")), "--seed", "7", "--out", p(&d("train.jsonl")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["corpus"]["reviews"], 450);
    assert_eq!(summary["test"]["Negative"], 99);
    assert_eq!(summary["excluded"], 24);

    let out = augbench(&[
        "analyze", "--corpus", p(&d("train.jsonl")), "--class", "neg", "--order", "3", "--order", "2", "--order", "1",
        "--top", "5", "--prompts", "6", "--prompts-out", p(&d("prompts.jsonl")), "--seed", "3", "--out", p(&d("table.json")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = stdout(&out);
    assert!(text.contains("order 3") && text.contains("80% - 100%") && text.contains("Prompt 6:"), "{text}");
    let table: serde_json::Value = serde_json::from_slice(&std::fs::read(d("table.json")).unwrap()).unwrap();
    assert_eq!(table["tables"][0]["order"], 3);
    assert_eq!(table["tables"][0]["rows"].as_array().unwrap().len(), 5);

    let out = augbench(&[
        "generate", "--class", "neg", "--corpus", p(&d("train.jsonl")), "--prompts", p(&d("prompts.jsonl")),
        "--count", "50", "--target-len", "70", "--seed", "9", "--out", p(&d("synth_neg.jsonl")),
        "--model-out", p(&d("gen_neg.json")),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(d("synth_neg.jsonl")).unwrap().lines().count(), 300);
    assert!(d("gen_neg.json").is_file());
    // same seed, same bytes
    let again = augbench(&[
        "generate", "--class", "neg", "--corpus", p(&d("train.jsonl")), "--prompts", p(&d("prompts.jsonl")),
        "--count", "50", "--target-len", "70", "--seed", "9", "--out", p(&d("synth_neg2.jsonl")),
    ]);
    assert!(again.status.success());
    assert_eq!(std::fs::read(d("synth_neg.jsonl")).unwrap(), std::fs::read(d("synth_neg2.jsonl")).unwrap());

    // wrong class prompts are a data error
    let out = augbench(&[
        "generate", "--class", "pos", "--corpus", p(&d("train.jsonl")), "--prompts", p(&d("prompts.jsonl")),
        "--count", "1", "--seed", "9", "--out", p(&d("x.jsonl")),
    ]);
    assert_eq!(out.status.code(), Some(2));

    let out = augbench(&["train", "--corpus", p(&d("train.jsonl")), "--out", p(&d("model.json"))]);
    assert!(out.status.success());
    let out = augbench(&["evaluate", "--model", p(&d("model.json")), "--test", p(&d("test.jsonl")), "--out", p(&d("eval_a.json"))]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("accuracy"));
    assert!(stdout(&out).contains("[["));

    // combined training file: genuine + synthetic
    let mut combined = std::fs::read_to_string(d("train.jsonl")).unwrap();
    combined.push_str(&std::fs::read_to_string(d("synth_neg.jsonl")).unwrap());
    std::fs::write(d("combined.jsonl"), combined).unwrap();
    assert!(augbench(&["train", "--corpus", p(&d("combined.jsonl")), "--out", p(&d("model_b.json"))]).status.success());
    assert!(augbench(&["evaluate", "--model", p(&d("model_b.json")), "--test", p(&d("test.jsonl")), "--out", p(&d("eval_b.json"))])
        .status
        .success());

    let out = augbench(&["compare", "--baseline", p(&d("eval_a.json")), "--candidate", p(&d("eval_a.json"))]);
    assert!(out.status.success());
    assert!(stdout(&out).lines().skip(1).all(|l| l.ends_with("0.00%")), "{}", stdout(&out));
    let out = augbench(&["--format", "json", "compare", "--baseline", p(&d("eval_a.json")), "--candidate", p(&d("eval_b.json"))]);
    assert!(out.status.success());
    let cmp: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(cmp["changes"][0]["metric"], "accuracy");
}

#[test]
fn synthetic_import_reports_partial_rejection() {
    let dir = tempfile::tempdir().unwrap();
    let src = dir.path().join("llm.jsonl");
    std::fs::write(
        &src,
        "{\"text\":\"great crust\",\"label\":\"Positive\"}\n{\"text\":\"cold\",\"label\":\"Negative\"}\n{\"text\":\"tasty\",\"label\":\"Positive\"}\n",
    )
    .unwrap();
    let out_path = dir.path().join("synth.jsonl");
    let out = augbench(&["ingest", "--synthetic", "--class", "pos", "--input", p(&src), "--out", p(&out_path)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 2"));
    let kept = std::fs::read_to_string(&out_path).unwrap();
    assert_eq!(kept.lines().count(), 2);
    assert!(kept.lines().all(|l| l.contains("\"provenance\":\"Synthetic\"")));
}

#[test]
fn run_writes_report_and_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("exp.conf");
    std::fs::write(
        &manifest,
        format!(
            "genuine = {}\nholdout_size = 100\nseed = 5\nsynthetic_count_neg = 100\nsynthetic_count_pos = 100\n",
            fixture("pizza_reviews.csv").display()
        ),
    )
    .unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let out = augbench(&["run", p(&manifest), "--out", p(&a)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(stdout(&out).contains("combined 748"), "{}", stdout(&out));
    assert!(augbench(&["run", p(&manifest), "--out", p(&b)]).status.success());
    assert_eq!(std::fs::read(a.join("report.json")).unwrap(), std::fs::read(b.join("report.json")).unwrap());

    let out = augbench(&["--format", "json", "run", p(&manifest), "--seed", "6"]);
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(report["sizes"]["test"], 100);

    std::fs::write(&manifest, "genuine = missing.csv\nseed = 1\n").unwrap();
    let out = augbench(&["run", p(&manifest)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("manifest"));
}
