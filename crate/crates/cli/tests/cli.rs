//! End-to-end CLI checks: byte-identical reruns for every subcommand, exit
//! codes for precondition violations, and report re-parseability.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_lipgraph"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stdout_of(args: &[&str]) -> Vec<u8> {
    let out = run(args);
    assert!(
        out.status.success(),
        "command {:?} failed: {}",
        args,
        String::from_utf8_lossy(&out.stderr)
    );
    out.stdout
}

fn assert_byte_identical(args: &[&str]) {
    let a = stdout_of(args);
    let b = stdout_of(args);
    assert!(!a.is_empty(), "no output from {args:?}");
    assert_eq!(a, b, "reruns of {args:?} differ");
}

struct Fixtures {
    _dir: tempfile::TempDir,
    cut: PathBuf,
    bipartite: PathBuf,
    pip: PathBuf,
    pip_bad_budget: PathBuf,
    lb: PathBuf,
    lb_tilde: PathBuf,
}

fn fixtures() -> Fixtures {
    let dir = tempfile::tempdir().unwrap();
    let cut = dir.path().join("cut.txt");
    let bipartite = dir.path().join("bip.txt");
    let pip = dir.path().join("pip.json");
    let pip_bad_budget = dir.path().join("pip_bad.json");
    let lb = dir.path().join("lb.txt");
    let lb_tilde = dir.path().join("lb_tilde.txt");
    let ok = run(&[
        "gen", "--kind", "random", "--n", "9", "--with-cut", "--seed", "41",
        "--out-file", cut.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    let ok = run(&[
        "gen", "--kind", "bipartite", "--left", "3", "--right", "4", "--seed", "42",
        "--out-file", bipartite.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    let ok = run(&[
        "gen", "--kind", "lowerbound", "--n", "16", "--capprox", "1", "--f-n", "2",
        "--seed", "43", "--out-file", lb.to_str().unwrap(),
        "--out-tilde", lb_tilde.to_str().unwrap(),
    ]);
    assert!(ok.status.success());
    std::fs::write(
        &pip,
        r#"{"a": [[1.0, 0.3], [0.2, 0.9]], "b": [1.0, 1.5], "w": [1.0, 2.0], "c": 2.0}"#,
    )
    .unwrap();
    std::fs::write(
        &pip_bad_budget,
        r#"{"a": [[1.0]], "b": [0.5], "w": [1.0], "c": 2.0}"#,
    )
    .unwrap();
    Fixtures {
        _dir: dir,
        cut,
        bipartite,
        pip,
        pip_bad_budget,
        lb,
        lb_tilde,
    }
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

#[test]
fn every_subcommand_is_byte_deterministic() {
    let f = fixtures();
    let cut = p(&f.cut);
    let bip = p(&f.bipartite);
    let pip = p(&f.pip);
    let lb = p(&f.lb);
    let lbt = p(&f.lb_tilde);
    let cases: Vec<Vec<&str>> = vec![
        vec!["mincut", "--instance", cut, "--algo", "expmech", "--gamma", "0.25", "--seed", "7"],
        vec!["mincut", "--instance", cut, "--algo", "kway", "--beta", "0.25", "--gamma", "0.25", "--seed", "7"],
        vec!["mincut", "--instance", cut, "--algo", "naive", "--lambda", "0.4", "--seed", "7", "--out", "csv"],
        vec!["mincut", "--instance", cut, "--algo", "fractional", "--eps", "0.2", "--seed", "7"],
        vec!["match", "--instance", bip, "--eps", "0.5", "--trials", "300", "--seed", "7"],
        vec!["match", "--instance", bip, "--eps", "0.5", "--trials", "300", "--seed", "7", "--out", "csv", "--jobs", "3"],
        vec!["pip", "--instance", pip, "--trials", "300", "--seed", "7"],
        vec!["pip", "--instance", pip, "--trials", "300", "--seed", "7", "--out", "csv"],
        vec!["stability", "--instance", cut, "--algo", "cut-naive", "--lambda", "0.4", "--trials", "200", "--seed", "7"],
        vec!["stability", "--instance", cut, "--algo", "cut-expmech", "--gamma", "0.25", "--trials", "200", "--seed", "7", "--out", "csv", "--jobs", "2"],
        vec!["recourse", "--instance", cut, "--algo", "cut-naive", "--lambda", "0.4", "--steps", "4", "--trials", "150", "--seed", "7"],
        vec!["recourse", "--instance", cut, "--algo", "cut-naive", "--lambda", "0.4", "--steps", "4", "--trials", "150", "--seed", "7", "--out", "csv"],
        vec!["sweep", "--instance", lb, "--target", lbt, "--algo", "cut-exact", "--steps", "4", "--seed", "7"],
        vec!["sweep", "--instance", lb, "--target", lbt, "--algo", "cut-exact", "--steps", "4", "--seed", "7", "--out", "csv"],
        vec!["validate", cut],
    ];
    for case in cases {
        assert_byte_identical(&case);
    }
    // gen twice into two files: identical bytes
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.txt");
    let b = dir.path().join("b.txt");
    for path in [&a, &b] {
        let ok = run(&[
            "gen", "--kind", "random", "--n", "7", "--seed", "99",
            "--out-file", path.to_str().unwrap(),
        ]);
        assert!(ok.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
}

#[test]
fn missing_seed_exits_with_usage_error() {
    let f = fixtures();
    let out = run(&["mincut", "--instance", p(&f.cut), "--algo", "expmech", "--gamma", "0.25"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn pip_budget_below_one_names_the_precondition() {
    let f = fixtures();
    let out = run(&[
        "pip", "--instance", p(&f.pip_bad_budget), "--trials", "10", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("B >= 1"), "stderr must name the B >= 1 precondition: {err}");
}

#[test]
fn expmech_smoke_produces_feasible_cut_report() {
    let f = fixtures();
    let out = stdout_of(&[
        "mincut", "--instance", p(&f.cut), "--algo", "expmech", "--gamma", "0.25", "--seed", "7",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["kind"], "mincut_report");
    assert!(v["cut"]["weight"].as_f64().unwrap() > 0.0);
}

#[test]
fn reports_are_reparseable_by_validate() {
    let f = fixtures();
    let dir = tempfile::tempdir().unwrap();
    let report_paths: Vec<(PathBuf, Vec<&str>)> = vec![
        (
            dir.path().join("mincut.json"),
            vec!["mincut", "--instance", p(&f.cut), "--algo", "expmech", "--gamma", "0.25", "--seed", "3"],
        ),
        (
            dir.path().join("match.json"),
            vec!["match", "--instance", p(&f.bipartite), "--eps", "0.5", "--trials", "100", "--seed", "3"],
        ),
        (
            dir.path().join("pip.json"),
            vec!["pip", "--instance", p(&f.pip), "--trials", "100", "--seed", "3"],
        ),
        (
            dir.path().join("stability.json"),
            vec!["stability", "--instance", p(&f.cut), "--algo", "cut-naive", "--lambda", "0.3", "--trials", "150", "--seed", "3"],
        ),
    ];
    for (path, mut args) in report_paths {
        args.push("--out-file");
        let s = path.to_str().unwrap().to_string();
        let mut owned: Vec<String> = args.iter().map(|x| x.to_string()).collect();
        owned.push(s);
        let argv: Vec<&str> = owned.iter().map(|x| x.as_str()).collect();
        let out = run(&argv);
        assert!(out.status.success(), "{:?}", String::from_utf8_lossy(&out.stderr));
        let validated = run(&["validate", path.to_str().unwrap()]);
        assert!(
            validated.status.success(),
            "validate failed on {path:?}: {}",
            String::from_utf8_lossy(&validated.stderr)
        );
        let msg = String::from_utf8_lossy(&validated.stdout);
        assert!(msg.starts_with("valid"), "unexpected validate output: {msg}");
    }
}

#[test]
fn nonconvergence_has_exit_code_three() {
    // a tolerance far below machine precision cannot converge within the cap
    let f = fixtures();
    let out = run(&[
        "mincut", "--instance", p(&f.cut), "--algo", "fractional", "--eps", "0.2",
        "--tol", "1e-300", "--seed", "1",
    ]);
    assert_eq!(out.status.code(), Some(3), "stderr: {}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn scan_mode_emits_three_reports() {
    let f = fixtures();
    let out = stdout_of(&[
        "stability", "--instance", p(&f.cut), "--algo", "cut-naive", "--lambda", "0.4",
        "--trials", "150", "--seed", "5", "--scan",
    ]);
    let v: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(v["scan"]["reports"].as_array().unwrap().len(), 3);
}
