use std::path::Path;
use std::process::{Command, Output};

fn dial(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dial"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path) -> String {
    let path = dir.join("demo.toml");
    std::fs::write(
        &path,
        "[dataset]\nsource = \"grid-blobs\"\nn = 120\nclusters = 4\nmodulo = 2\n\
         [acquisition]\nnames = [\"dirvar-prop\", \"random\"]\n\
         [experiment]\nbudget = 4\ntrials = 2\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn missing_config_exits_2_naming_path() {
    let out = dial(&["run", "missing.cfg"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.cfg"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let out = dial(&["frobnicate"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn bad_override_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dial(&["run", &cfg, "--acquisitions", "lands"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn runtime_failure_exits_3() {
    let out = dial(&["theory", "qbar", "--lambda0=-1"]);
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn zero_budget_writes_initial_rows_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = dial(&["run", &cfg, "--budget", "0", "--out", out_dir.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let curves = std::fs::read_to_string(out_dir.join("curves.csv")).unwrap();
    let rows: Vec<&str> = curves.lines().skip(1).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r.split(',').nth(1) == Some("0")));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        let out = dial(&["--threads", "1", "run", &cfg, "--seed", "3", "--out", d.to_str().unwrap()]);
        assert!(out.status.success());
    }
    for f in ["curves.csv", "queries.csv"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap());
    }
}

#[test]
fn explore_bound_prints_constant() {
    let out = dial(&["theory", "explore-bound", "--k", "2", "--alpha0", "0.25", "--eps", "0", "--zeta", "1"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("C = 0.40740"));
}

#[test]
fn theory_commands_emit_csv() {
    let dir = tempfile::tempdir().unwrap();
    let ode = dir.path().join("ode.csv");
    let out = dial(&["theory", "ode", "--schedule", "linear:5", "--t-end", "1e3", "--out", ode.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&ode).unwrap();
    assert!(text.starts_with("x,g,q_t"));
    assert_eq!(text.lines().count(), 402);

    let out = dial(&["theory", "qbar", "--lambda0", "5"]);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("x,g,qbar\n"));

    let out = dial(&["theory", "mc-discovery", "--k", "2", "--trials", "200"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("k,lambda,alpha0,trials,frequency"));

    let out = dial(&["theory", "consistency", "--sizes", "50,200", "--trials", "2"]);
    assert_eq!(String::from_utf8_lossy(&out.stdout).lines().count(), 3);

    let out = dial(&["theory", "ode", "--schedule", "cubic:2"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn graph_report_and_timing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path());
    let out = dial(&["graph-report", &cfg]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("key,value\nn,120\n"));

    let timing = dir.path().join("t/timing.csv");
    let out = dial(&[
        "bench-timing",
        "--sizes",
        "100,200",
        "--acquisitions",
        "dirvar",
        "--repetitions",
        "1",
        "--out",
        timing.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(timing).unwrap().lines().count(), 3);
}

#[test]
fn version_flag() {
    let out = dial(&["--version"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("dial "));
}
