use std::path::Path;
use std::process::Command;

use gibbsbound_cli::{cmd_bound, cmd_certify, cmd_optimize, cmd_simulate, cmd_validate, ConfigMap, RunConfig};

fn config(model: &str, out: &Path, extra: &[&str]) -> RunConfig {
    let mut map = ConfigMap::from_model_arg(model).unwrap();
    map.set("out", out.display().to_string()).unwrap();
    for a in extra {
        map.apply_assignment(a).unwrap();
    }
    RunConfig::from_map(&map).unwrap()
}

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_gibbsbound"))
}

#[test]
fn certify_worked_model() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_certify(&config("worked", dir.path(), &[])).unwrap();
    assert!(out.passed);
    for line in ["u = 0\n", "L = 0.375\n", "ch = 0.25\n", "epsilon = 0.225553022\n"] {
        assert!(out.summary.contains(line), "missing {line:?} in\n{}", out.summary);
    }
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("certificate.json")).unwrap()).unwrap();
    assert_eq!(json["drift"]["L"], 0.375);
    assert_eq!(json["small_set"]["feasible"], true);
    assert_eq!(json["moments"]["k"], 0.125);
}

#[test]
fn certify_beta_binomial() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_certify(&config("family=beta_binomial,n=1,alpha=1,beta=1", dir.path(), &[])).unwrap();
    assert!(out.summary.contains("ch = 0\n"));
    assert!(out.summary.contains("L = 0.25\n"));
    assert!(out.summary.contains("u = 0.5\n"));
}

#[test]
fn certify_reports_infeasible_small_set() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_certify(&config("worked", dir.path(), &["w=0.8"])).unwrap();
    assert!(!out.passed);
    assert!(out.summary.contains("feasible = false"));
}

#[test]
fn bound_report_and_columns() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_bound(&config("worked", dir.path(), &[])).unwrap();
    assert!(out.summary.contains("rosenthal n* = 99"), "{}", out.summary);
    assert!(out.summary.contains("dksc n* = 3"), "{}", out.summary);
    let csv = std::fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("l,rosenthal,dksc,exact_tv"));
    assert_eq!(lines.next(), Some("1,2.35201473,0.0905477208,0.0694908861"));
    assert_eq!(csv.lines().count(), 201);

    let loose = cmd_bound(&config("worked", dir.path(), &["omega=0.5"])).unwrap();
    let n = |s: &str, key: &str| -> u64 {
        let rest = &s[s.find(key).unwrap() + key.len()..];
        rest.split_whitespace().next().unwrap().parse().unwrap()
    };
    assert!(n(&loose.summary, "rosenthal n* = ") <= 99);
    assert!(n(&loose.summary, "dksc n* = ") <= 3);
}

#[test]
fn bound_without_closed_form_column() {
    let dir = tempfile::tempdir().unwrap();
    let out = cmd_bound(&config(
        "family=gaussian,nu=0,sigma2=0.5,tau2=0.5",
        dir.path(),
        &["w=3"],
    ))
    .unwrap();
    assert!(out.summary.contains("dksc column omitted"));
    let csv = std::fs::read_to_string(dir.path().join("bound.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("l,rosenthal,exact_tv"));
}

#[test]
fn bound_needs_epsilon_for_discrete_families() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("family=poisson_gamma,alpha=1,beta=1", dir.path(), &[]);
    assert!(cmd_bound(&cfg).is_err());
    let cfg = config(
        "family=poisson_gamma,alpha=1,beta=1",
        dir.path(),
        &["epsilon=0.2", "w=40"],
    );
    let out = cmd_bound(&cfg).unwrap();
    assert_eq!(
        std::fs::read_to_string(dir.path().join("bound.csv"))
            .unwrap()
            .lines()
            .next(),
        Some("l,rosenthal")
    );
    assert!(out.summary.contains("rosenthal"));
}

#[test]
fn optimize_pinned_grid() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config(
        "worked",
        dir.path(),
        &["grid_r=0.1895820", "grid_gamma=0.25", "grid_w=2.203030"],
    );
    let out = cmd_optimize(&cfg).unwrap();
    assert!(out.summary.contains("n* = 99"));
    let trace = std::fs::read_to_string(dir.path().join("trace.csv")).unwrap();
    assert_eq!(
        trace.lines().nth(1),
        Some("grid,0,0.189582,0.25,2.20303,0.225553022,0.952697054,0.932878452,1.5,99,0.00979584055")
    );
}

#[test]
fn validate_worked_and_corrupted() {
    let dir = tempfile::tempdir().unwrap();
    let ok = cmd_validate(&config("worked", dir.path(), &["samples=20000", "lmax=50"])).unwrap();
    assert!(ok.passed, "{}", ok.summary);
    let bad = cmd_validate(&config("worked", dir.path(), &["samples=20000", "epsilon_scale=1.5"])).unwrap();
    assert!(!bad.passed);
    assert!(bad.summary.contains("FAIL domination"));
    let bb = cmd_validate(&config("family=beta_binomial,n=1,alpha=1,beta=1", dir.path(), &[])).unwrap();
    assert!(bb.passed);
    assert!(bb.summary.contains("PASS drift_identity_exact"));
}

#[test]
fn simulate_writes_path_and_tv_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = config("worked", dir.path(), &["length=50", "tv_steps=3", "replicates=10000"]);
    cmd_simulate(&cfg).unwrap();
    let path = std::fs::read_to_string(dir.path().join("path.csv")).unwrap();
    assert_eq!(path.lines().count(), 52);
    assert!(path.starts_with("i,x,theta\n0,0,\n"));
    let tv = std::fs::read_to_string(dir.path().join("tv.csv")).unwrap();
    let rows: Vec<&str> = tv.lines().collect();
    assert_eq!(rows[0], "l,exact,empirical,rosenthal,dksc");
    assert!(rows[4].starts_with("3,0.00381062166,"));
    let empirical: f64 = rows[4].split(',').nth(2).unwrap().parse().unwrap();
    assert!((empirical - 0.00381).abs() < 0.05);
}

#[test]
fn binary_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let ok = bin()
        .args(["certify", "--model", "worked", "--out", out])
        .output()
        .unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("L = 0.375"));

    let bad = bin()
        .args(["certify", "--model", "family=gaussian,sigma2=0,tau2=1", "--out", out])
        .output()
        .unwrap();
    assert!(!bad.status.success());
    assert!(String::from_utf8_lossy(&bad.stderr).contains("sigma2"));

    let corrupted = bin()
        .args([
            "validate",
            "--model",
            "worked",
            "--out",
            out,
            "--epsilon-scale",
            "1.5",
            "--set",
            "samples=5000",
        ])
        .output()
        .unwrap();
    assert_eq!(corrupted.status.code(), Some(1));

    let empty = bin()
        .args(["optimize", "--model", "worked", "--out", out, "--grid-w", "none"])
        .output()
        .unwrap();
    assert!(!empty.status.success());
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let file = dir.path().join("run.cfg");
    std::fs::write(
        &file,
        "family = gaussian\nnu = 0\nsigma2 = 0.25\ntau2 = 0.25\nomega = 0.5\nlmax = 10\n",
    )
    .unwrap();
    let out = dir.path().join("o");
    let run = bin()
        .args([
            "bound",
            "--config",
            file.to_str().unwrap(),
            "--omega",
            "0.01",
            "--out",
            out.to_str().unwrap(),
        ])
        .output()
        .unwrap();
    assert!(run.status.success());
    let stdout = String::from_utf8_lossy(&run.stdout);
    assert!(stdout.contains("omega = 0.01"));
    assert!(stdout.contains("dksc n* = 3"));
    assert_eq!(
        std::fs::read_to_string(out.join("bound.csv")).unwrap().lines().count(),
        11
    );
}
