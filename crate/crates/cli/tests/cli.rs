//! End-to-end smoke tests for the command-line surface.

use std::path::Path;
use std::process::{Command, Output};

fn demoselect(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_demoselect"))
        .args(args)
        .current_dir(dir)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn stdout(output: &Output) -> String {
    String::from_utf8_lossy(&output.stdout).to_string()
}

#[test]
fn annotate_eval_select_round_trip() {
    let dir = tempfile::tempdir().unwrap();

    let annotate = demoselect(
        &[
            "annotate",
            "--tasks",
            "builtin:train+dev",
            "--solver",
            "react",
            "--rounds",
            "3",
            "--pool",
            "pool.jsonl",
        ],
        dir.path(),
    );
    assert!(annotate.status.success(), "{annotate:?}");
    assert!(stdout(&annotate).contains("annotated 15 task(s)"));

    let stats = demoselect(&["pool", "stats", "pool.jsonl"], dir.path());
    assert!(stats.status.success());
    let text = stdout(&stats);
    assert!(text.contains("records: 15 (15 react, 0 pne)"), "{text}");
    assert!(text.contains("unannotated: 0"), "{text}");

    let eval = demoselect(
        &[
            "eval",
            "--split",
            "test_normal",
            "--method",
            "cos",
            "--k",
            "1",
            "--runs",
            "1",
            "--out",
            "results",
            "--pool",
            "pool.jsonl",
        ],
        dir.path(),
    );
    assert!(eval.status.success(), "{eval:?}");
    let text = stdout(&eval);
    assert!(text.contains("TGC 100.0"), "{text}");
    assert!(dir.path().join("results/report.json").exists());
    assert!(dir
        .path()
        .join("results/transcripts/test_normal_split_payment_1_0.jsonl")
        .exists());

    let zero_shot = demoselect(
        &[
            "eval",
            "--split",
            "test_normal",
            "--method",
            "zeroshot",
            "--k",
            "0",
            "--runs",
            "1",
            "--pool",
            "pool.jsonl",
        ],
        dir.path(),
    );
    assert!(zero_shot.status.success());
    assert!(stdout(&zero_shot).contains("TGC 0.0"), "{}", stdout(&zero_shot));

    let select = demoselect(
        &[
            "select",
            "--key",
            "transfer cents from alice to bob",
            "--method",
            "set_bsr",
            "--k",
            "2",
            "--pool",
            "pool.jsonl",
        ],
        dir.path(),
    );
    assert!(select.status.success());
    let parsed: serde_json::Value = serde_json::from_str(&stdout(&select)).unwrap();
    assert_eq!(parsed["method"], "set_bsr");
    assert!(!parsed["selected"].as_array().unwrap().is_empty());
}

#[test]
fn run_prints_trajectory_and_verdict() {
    let dir = tempfile::tempdir().unwrap();
    let annotate = demoselect(
        &[
            "annotate",
            "--tasks",
            "builtin:train",
            "--pool",
            "pool.jsonl",
        ],
        dir.path(),
    );
    assert!(annotate.status.success());

    let run = demoselect(
        &[
            "run",
            "--task",
            "test_normal_note_copy_1",
            "--method",
            "bsr",
            "--k",
            "1",
            "--snippets",
            "--pool",
            "pool.jsonl",
            "--transcript",
            "transcript.jsonl",
        ],
        dir.path(),
    );
    assert!(run.status.success(), "{run:?}");
    let text = stdout(&run);
    assert!(text.contains("checker: PASS"), "{text}");
    assert!(text.contains("--- step 1"), "{text}");
    assert!(dir.path().join("transcript.jsonl").exists());
}

#[test]
fn integrity_and_config_errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();

    let missing_pool = demoselect(
        &[
            "eval",
            "--split",
            "test_normal",
            "--method",
            "cos",
            "--k",
            "1",
            "--pool",
            "nope.jsonl",
        ],
        dir.path(),
    );
    assert!(!missing_pool.status.success());

    let bad_split = demoselect(
        &[
            "eval",
            "--split",
            "not_a_split",
            "--method",
            "cos",
            "--k",
            "1",
            "--pool",
            "nope.jsonl",
        ],
        dir.path(),
    );
    assert!(!bad_split.status.success());

    let unknown_task = demoselect(
        &["run", "--task", "no_such_task", "--pool", "nope.jsonl"],
        dir.path(),
    );
    assert!(!unknown_task.status.success());

    std::fs::write(dir.path().join("empty.jsonl"), "").unwrap();
    let bad_fixed = demoselect(
        &[
            "eval",
            "--split",
            "test_normal",
            "--method",
            "fixed",
            "--k",
            "1",
            "--fixed-id",
            "missing",
            "--pool",
            "empty.jsonl",
        ],
        dir.path(),
    );
    assert!(!bad_fixed.status.success());
}

#[test]
fn resume_continues_from_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    // One round only: split the work, then resume with the full budget.
    let first = demoselect(
        &[
            "annotate",
            "--tasks",
            "builtin:train",
            "--rounds",
            "1",
            "--pool",
            "pool.jsonl",
        ],
        dir.path(),
    );
    assert!(first.status.success());

    let resumed = demoselect(
        &[
            "annotate",
            "--tasks",
            "builtin:train",
            "--rounds",
            "3",
            "--pool",
            "pool.jsonl",
            "--resume",
        ],
        dir.path(),
    );
    assert!(resumed.status.success(), "{resumed:?}");
    assert!(stdout(&resumed).contains("annotated 12 task(s)"));
}
