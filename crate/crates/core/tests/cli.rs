use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sdnsn"))
}

fn scenario(file: &str) -> PathBuf {
    [env!("CARGO_MANIFEST_DIR"), "scenarios", file].iter().collect()
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn digest_line(o: &Output) -> String {
    stdout(o).lines().find(|l| l.starts_with("digest ")).unwrap().to_string()
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

#[test]
fn shipped_scenarios_validate() {
    for file in ["multimedia.scn", "digital-twin.scn", "line3.scn"] {
        let o = run(&["validate", scenario(file).to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{file}");
        assert!(stdout(&o).contains("valid"));
    }
}

#[test]
fn invalid_scenarios_exit_1_with_paths() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(scenario("line3.scn")).unwrap();

    let bad = base.replace("b_face = 1\ndelay_ms = 4\n\n[[links]]\na = \"nsn2\"", "b_face = 1\ndelay_ms = 4\n\n[[links]]\na = \"nsn9\"");
    let o = run(&["validate", write(dir.path(), "bad.scn", &bad).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("links[1].a"));

    let o = run(&["validate", write(dir.path(), "syntax.scn", "seed = [").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));

    let o = run(&["run", "--scenario", write(dir.path(), "bad2.scn", &bad).to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn missing_file_is_a_runtime_error() {
    let o = run(&["validate", "/definitely/not/here.scn"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["run", "--scenario", "/definitely/not/here.scn"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn run_writes_trace_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("t.tsv");
    let metrics = dir.path().join("m.json");
    let o = run(&[
        "run",
        "--scenario",
        scenario("multimedia.scn").to_str().unwrap(),
        "--trace",
        trace.to_str().unwrap(),
        "--metrics",
        metrics.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let text = std::fs::read_to_string(&trace).unwrap();
    assert!(text.ends_with('\n'));
    for line in text.lines() {
        assert_eq!(line.split('\t').count(), 7, "{line}");
        assert!(sdnsn::simnet::TraceRecord::parse_line(line).is_some(), "{line}");
    }
    let digest = format!("{:016x}", sdnsn::agent::digest(text.as_bytes()));
    assert_eq!(digest_line(&o), format!("digest {digest}"));

    let json: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&metrics).unwrap()).unwrap();
    assert_eq!(json["version"], 1);
    assert_eq!(json["trace_digest"], digest);
    assert_eq!(json["requests"].as_array().unwrap().len(), 2);
    assert_eq!(json["requests"][0]["status"], "completed");
}

#[test]
fn seed_flag_changes_digest_reproducibly() {
    let path = scenario("line3.scn");
    let path = path.to_str().unwrap();
    let a = run(&["run", "--scenario", path, "--seed", "5"]);
    let b = run(&["run", "--scenario", path, "--seed", "5"]);
    let c = run(&["run", "--scenario", path, "--seed", "6"]);
    assert_eq!(digest_line(&a), digest_line(&b));
    assert_ne!(digest_line(&a), digest_line(&c));
}

#[test]
fn strict_fails_when_horizon_cuts_the_run() {
    let dir = tempfile::tempdir().unwrap();
    let base = std::fs::read_to_string(scenario("line3.scn")).unwrap();
    let short = base.replace("horizon_ms = 5000", "horizon_ms = 250");
    let short = write(dir.path(), "short.scn", &short);
    let short = short.to_str().unwrap();
    assert_eq!(run(&["run", "--scenario", short]).status.code(), Some(0));
    assert_eq!(run(&["run", "--scenario", short, "--strict"]).status.code(), Some(2));
    let full = scenario("line3.scn");
    assert_eq!(run(&["run", "--scenario", full.to_str().unwrap(), "--strict"]).status.code(), Some(0));
}

#[test]
fn sweep_parallel_matches_sequential() {
    let path = scenario("multimedia.scn");
    let path = path.to_str().unwrap();
    let par = run(&["sweep", "--scenario", path, "--count", "6"]);
    let seq = run(&["sweep", "--scenario", path, "--count", "6", "--sequential"]);
    assert_eq!(par.status.code(), Some(0));
    assert_eq!(stdout(&par), stdout(&seq));
}
