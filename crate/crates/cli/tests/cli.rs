use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn jcj(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_jcj")).args(args).output().unwrap()
}

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn run_to(dir: &Path, name: &str, extra: &[&str]) -> (Output, PathBuf) {
    let out = dir.join(name);
    let cfg = config("sample.json");
    let mut args = vec!["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend(extra);
    (jcj(&args), out)
}

#[test]
fn run_sample_config() {
    let dir = tempfile::tempdir().unwrap();
    let (o, path) = run_to(dir.path(), "t.jsonl", &[]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(path).unwrap();
    assert_eq!(text.lines().filter(|l| l.contains("\"kind\":\"ballot\"")).count(), 10);
}

#[test]
fn same_seed_same_transcript() {
    let dir = tempfile::tempdir().unwrap();
    for backend in ["quadratic", "linear", "smith_weber"] {
        let (_, a) = run_to(dir.path(), "a.jsonl", &["--backend", backend]);
        let (_, b) = run_to(dir.path(), "b.jsonl", &["--backend", backend]);
        assert_eq!(std::fs::read(a).unwrap(), std::fs::read(b).unwrap(), "{backend}");
    }
}

#[test]
fn invalid_backend_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let (o, _) = run_to(dir.path(), "t.jsonl", &["--backend", "bogus"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_files_exit_2() {
    assert_eq!(jcj(&["audit", "/nonexistent/t.jsonl"]).status.code(), Some(2));
    assert_eq!(jcj(&["run", "--config", "/nonexistent/c.json"]).status.code(), Some(2));
}

#[test]
fn audit_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let (_, path) = run_to(dir.path(), "t.jsonl", &["--backend", "smith_weber"]);
    let p = path.to_str().unwrap();
    let o = jcj(&["audit", p]);
    assert_eq!(o.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&o.stdout).contains("audit passed"));

    let text = std::fs::read_to_string(&path).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.swap(5, 6);
    let bad = dir.path().join("bad.jsonl");
    std::fs::write(&bad, lines.join("\n")).unwrap();
    let o = jcj(&["audit", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stdout).contains("FAILED"));
}

#[test]
fn attack_demo_verdicts() {
    let o = jcj(&["attack-demo", "--voters", "4"]);
    assert_eq!(o.status.code(), Some(0));
    let stdout = String::from_utf8(o.stdout).unwrap();
    let verdicts: Vec<serde_json::Value> = stdout
        .lines()
        .filter(|l| l.starts_with('{'))
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    let find = |b: &str| verdicts.iter().find(|v| v["backend"] == b).unwrap().clone();
    assert_eq!(find("smith_weber")["real"], "registered");
    assert_eq!(find("smith_weber")["fake"], "not_registered");
    assert_eq!(find("linear")["real"], "inconclusive");
    assert_eq!(find("linear")["fake"], "inconclusive");
    assert_eq!(find("quadratic")["real"], "not_applicable");
}

#[test]
fn bench_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("b.csv");
    let o = jcj(&["bench", "--sizes", "0,4,8", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    let csv = std::fs::read_to_string(out).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next(),
        Some("backend,n,roll,pet_count,hash_eval_count,wall_time_ms,seed")
    );
    let rows: Vec<Vec<&str>> = lines.map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().any(|r| r[..5] == ["quadratic", "0", "0", "0", "0"]));
    assert!(rows.iter().any(|r| r[..5] == ["quadratic", "8", "8", "92", "0"]));
    assert!(rows.iter().any(|r| r[..5] == ["linear", "8", "8", "0", "24"]));
    assert!(String::from_utf8_lossy(&o.stderr).contains("log-log slope"));
    assert_eq!(jcj(&["bench", "--sizes", "8,4"]).status.code(), Some(2));
}

#[test]
fn scenario_gen_and_configs() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["coercion.json", "eligibility.json"] {
        let out = dir.path().join("s.jsonl");
        let cfg = config(name);
        let o = jcj(&[
            "scenario-gen",
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
        let summary: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
        assert!(summary["expected"].is_array());
        assert!(out.exists());
    }
}
