use std::path::Path;
use std::process::{Command, Output};

fn qinsdel(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qinsdel"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_args<'a>(out: &'a str, scheme: &'a str, adversary: &'a str) -> Vec<&'a str> {
    vec![
        "run", "--scheme", scheme, "--n", "60", "--delta", "1/10", "--epsilon", "1/2",
        "--adversary", adversary, "--trials", "25", "--seed", "3", "--out", out,
    ]
}

#[test]
fn run_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("t.jsonl");
    let o = qinsdel(&run_args(out.to_str().unwrap(), "trivial", "uniform-random-insdel"));
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 25);
    for line in text.lines() {
        assert!(line.starts_with("{\"formatVersion\":1,"));
        assert!(line.contains("\"2c+e<=p+q\":{"));
    }
    let csv = std::fs::read_to_string(Path::new(&format!("{}.summary.csv", out.display()))).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("formatVersion,scheme,n,"));
    assert!(rows[1].starts_with("1,trivial,60,1/10,1/2,uniform-random-insdel,25,0,"));
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    for p in [&a, &b] {
        let o = qinsdel(&run_args(p.to_str().unwrap(), "sync", "index-forging"));
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn qubit_run_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("q.jsonl");
    let o = qinsdel(&[
        "run", "--scheme", "qubit", "--n", "1000", "--delta", "1/64", "--adversary", "barrier-attacker",
        "--trials", "5", "--seed", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(std::fs::read_to_string(&out).unwrap().contains("chunkErrors"));
}

#[test]
fn verify_reports_zero_counterexamples() {
    let o = qinsdel(&["verify", "--scheme", "trivial", "--n", "4", "--budget", "2"]);
    assert!(o.status.success());
    assert!(String::from_utf8_lossy(&o.stdout).contains("0 counterexamples"));
    let o = qinsdel(&["verify", "--scheme", "sync", "--n", "8", "--budget", "2", "--epsilon", "1/2"]);
    assert!(o.status.success());
}

#[test]
fn verify_rejects_oversized_instances() {
    let o = qinsdel(&["verify", "--scheme", "trivial", "--n", "13", "--budget", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn syncgen_output_parses_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("s.txt");
    let o = qinsdel(&[
        "syncgen", "--n", "40", "--epsilon", "1/2", "--alphabet", "16", "--seed", "2", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let s = qinsdel::sync_string::SyncString::from_text(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_eq!(s.len(), 40);
}

#[test]
fn bad_config_names_the_field() {
    let o = qinsdel(&run_args("/dev/null", "trivial", "nobody"));
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("adversary"));
    let o = qinsdel(&["run", "--scheme", "sync", "--n", "10", "--delta", "x/y", "--adversary", "burst-delete", "--out", "/dev/null"]);
    assert!(!o.status.success());
}
