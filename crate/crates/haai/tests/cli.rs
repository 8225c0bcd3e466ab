//! Black-box tests of the `haai` binary: exit codes, scripted runs, the REPL
//! over piped stdin, and REPL/batch trace equivalence.

use std::io::Write;
use std::process::{Command, Output, Stdio};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_haai"))
}

fn fixture(name: &str) -> String {
    format!("{}/fixtures/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn stdout_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

#[test]
fn scripted_run_echoes_each_turn() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_tmp(
        &dir,
        "k.jsonl",
        "{\"batch\": 0, \"source\": \"k\", \"value\": 300}\n\
         {\"batch\": 1, \"source\": \"k\", \"value\": 273}\n",
    );
    let out = bin()
        .args(["run", &fixture("to_celsius.haai"), "--script"])
        .arg(&script)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let expect_0 = format!("c = {}", haai::Value::Float(300.0 - 273.15));
    let expect_1 = format!("c = {}", haai::Value::Float(273.0 - 273.15));
    let stdout = stdout_of(&out);
    let lines: Vec<&str> = stdout.lines().collect();
    // Sources echo too: each turn reports every global that emitted.
    assert_eq!(
        lines,
        vec!["k = 300", expect_0.as_str(), "k = 273", expect_1.as_str()]
    );
}

#[test]
fn freezing_threshold_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_tmp(
        &dir,
        "t.jsonl",
        "{\"batch\": 0, \"source\": \"temperature\", \"value\": 270.0}\n\
         {\"batch\": 1, \"source\": \"temperature\", \"value\": 300.0}\n",
    );
    let out = bin()
        .args(["run", &fixture("freezing_monitor_manual.haai"), "--script"])
        .arg(&script)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("freezing-temperature = #t"), "{stdout}");
    assert!(stdout.contains("freezing-temperature = #f"), "{stdout}");
}

#[test]
fn parse_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let bad = write_tmp(&dir, "bad.haai", "(def x (+ 1");
    let out = bin().arg("run").arg(&bad).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(!out.stderr.is_empty());
}

#[test]
fn poisoned_deployments_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let script = write_tmp(
        &dir,
        "x.jsonl",
        "{\"batch\": 0, \"source\": \"x\", \"value\": 1}\n",
    );
    let out = bin()
        .args(["run", &fixture("diverging_loop.haai"), "--script"])
        .arg(&script)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("depth budget"), "{stderr}");
    // The sibling pipeline still echoed its value.
    assert!(stdout_of(&out).contains("ok = 2"));
}

#[test]
fn check_exit_codes_encode_the_tier() {
    let out = bin()
        .args(["check", &fixture("to_celsius.haai")])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(stdout_of(&out).contains("Strong"));

    let dir = tempfile::tempdir().unwrap();
    let eventual = write_tmp(
        &dir,
        "concat.haai",
        "(defr (tag s) (string-append \"temp: \" s))\n",
    );
    let out = bin().arg("check").arg(&eventual).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stdout_of(&out).contains("Eventual"));

    let out = bin()
        .args(["check", &fixture("collatz_length.haai"), "--json"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(report["tier"], serde_json::json!("Weak"));
    assert!(report["features"]["recursion_cycles"]
        .as_array()
        .map(|c| !c.is_empty())
        .unwrap_or(false));
}

#[test]
fn graph_prints_dot_and_rejects_unknown_reactors() {
    let out = bin()
        .args(["graph", "--reactor", "min-max"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));
    let dot = stdout_of(&out);
    assert!(dot.starts_with("digraph"));
    assert_eq!(dot.matches("style=dashed").count(), 2);

    let out = bin()
        .args(["graph", "--reactor", "no-such-reactor"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
}

fn run_repl(input: &str, extra: &[&str]) -> Output {
    let mut child = bin()
        .arg("repl")
        .args(extra)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    child
        .stdin
        .take()
        .unwrap()
        .write_all(input.as_bytes())
        .unwrap();
    child.wait_with_output().unwrap()
}

#[test]
fn repl_session_defines_and_injects() {
    let out = run_repl(
        "(defr (to-c k)\n  (- k 273.15))\n\
         (def k (manual-in \"k\"))\n\
         (def c (to-c k))\n\
         :inject k 300\n\
         :check\n\
         :quit\n",
        &[],
    );
    assert_eq!(out.status.code(), Some(0));
    let stdout = stdout_of(&out);
    assert!(stdout.contains("reactor to-c"), "{stdout}");
    let expected = format!("c = {}", haai::Value::Float(300.0 - 273.15));
    assert!(stdout.contains(&expected), "{stdout}");
    assert!(stdout.contains("tier: Strong"), "{stdout}");
}

#[test]
fn repl_and_batch_runs_trace_identically() {
    let dir = tempfile::tempdir().unwrap();
    let program_text = "(def s (manual-in \"s\"))\n(def (mi ma) (min-max s))\n";
    let program = write_tmp(&dir, "mm.haai", program_text);
    let script = write_tmp(
        &dir,
        "mm.jsonl",
        "{\"batch\": 0, \"source\": \"s\", \"value\": 5}\n\
         {\"batch\": 1, \"source\": \"s\", \"value\": 3}\n\
         {\"batch\": 2, \"source\": \"s\", \"value\": 7}\n",
    );
    let batch_trace = dir.path().join("batch.jsonl");
    let out = bin()
        .args(["run"])
        .arg(&program)
        .arg("--script")
        .arg(&script)
        .arg("--trace")
        .arg(&batch_trace)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(0));

    let repl_trace = dir.path().join("repl.jsonl");
    let out = run_repl(
        &format!("{program_text}:inject s 5\n:inject s 3\n:inject s 7\n:quit\n"),
        &["--trace", repl_trace.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(0));

    let batch = std::fs::read(&batch_trace).unwrap();
    let repl = std::fs::read(&repl_trace).unwrap();
    assert!(!batch.is_empty());
    assert_eq!(batch, repl, "REPL and scripted runs must trace identically");
}
