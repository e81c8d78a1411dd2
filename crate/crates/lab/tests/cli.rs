use std::path::{Path, PathBuf};
use std::process::{Command, Output};
use std::time::Instant;

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_sublap"))
}

fn shipped(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn sublap(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn report(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("report.json")).unwrap()).unwrap()
}

/// The shipped OU config with `edit` applied to its text.
fn ou_variant(dir: &Path, name: &str, edit: impl Fn(String) -> String) -> PathBuf {
    let text = std::fs::read_to_string(shipped("ou_1d.toml")).unwrap();
    let p = dir.join(name);
    std::fs::write(&p, edit(text)).unwrap();
    p
}

#[test]
fn ou_poincare_gap_is_one() {
    let tmp = tempfile::tempdir().unwrap();
    let out = sublap(&[
        "poincare-gap",
        "--config",
        path(&shipped("ou_1d.toml")),
        "--out",
        path(tmp.path()),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(tmp.path());
    let lambda1 = r["poincare_gap"]["lambda1"].as_f64().unwrap();
    assert!((0.98..=1.02).contains(&lambda1), "lambda1 = {lambda1}");
    assert!(r["config_hash"].as_str().unwrap().len() == 64);
    assert_eq!(r["tool"]["name"], "sublap");
    let eig = std::fs::read_to_string(tmp.path().join("eigenvalues.csv")).unwrap();
    assert!(eig.starts_with("k,eigenvalue,residual\n"));
    assert!(tmp.path().join("report.meta.json").exists());
}

#[test]
fn lyapunov_exponent_out_of_range_is_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ou_variant(tmp.path(), "bad.toml", |t| t.replace("a = 0.5", "a = 1.5"));
    let out = sublap(&["check-lyapunov", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("lyapunov.a"));
    assert!(!tmp.path().join("report.json").exists());
}

#[test]
fn missing_config_flag_is_usage_error() {
    let out = sublap(&["poincare-gap"]);
    assert_eq!(out.status.code(), Some(1));
    let out = sublap(&["poincare-gap", "--config", "/nonexistent/config.toml"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(sublap(&["--help"]).status.code(), Some(0));
}

#[test]
fn short_domain_is_refused_with_suggestion() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ou_variant(tmp.path(), "short.toml", |t| {
        t.replace("domain_radius = 8.0", "domain_radius = 3.0")
    });
    let out = sublap(&["poincare-gap", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("radius"), "{err}");
}

#[test]
fn unknown_keys_are_rejected() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = ou_variant(tmp.path(), "typo.toml", |t| t.replace("eigen_count", "eigencount"));
    let out = sublap(&["poincare-gap", "--config", path(&cfg), "--out", path(tmp.path())]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn compare_identical_reports_is_empty() {
    let tmp = tempfile::tempdir().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    for d in [&a, &b] {
        let out = sublap(&[
            "poincare-gap",
            "--config",
            path(&shipped("ou_1d.toml")),
            "--out",
            path(d),
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let out = sublap(&["compare", path(&a.join("report.json")), path(&b.join("report.json"))]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("0 differing fields"));
}

#[test]
fn two_resolutions_agree_within_one_percent() {
    let tmp = tempfile::tempdir().unwrap();
    let coarse = ou_variant(tmp.path(), "coarse.toml", |t| {
        t.replace("refined_resolution = 801\n", "")
    });
    let fine = ou_variant(tmp.path(), "fine.toml", |t| {
        t.replace("resolution = 401", "resolution = 801")
            .replace("refined_resolution = 801\n", "")
    });
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(
        sublap(&["poincare-gap", "--config", path(&coarse), "--out", path(&a)])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        sublap(&["poincare-gap", "--config", path(&fine), "--out", path(&b)])
            .status
            .code(),
        Some(0)
    );
    let summary = sublap::compare::compare(&a.join("report.json"), &b.join("report.json"), 0.01).unwrap();
    let d = summary
        .diffs
        .iter()
        .find(|d| d.path == "/poincare_gap/lambda1")
        .expect("lambda1 differs");
    assert!(!d.exceeds, "{d:?}");
}

#[test]
fn perturbed_weight_is_flagged() {
    let tmp = tempfile::tempdir().unwrap();
    let steeper = ou_variant(tmp.path(), "steeper.toml", |t| {
        t.replace("name = \"gaussian\"", "polynomial = \"0.55*x^2\"")
    });
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let ou = shipped("ou_1d.toml");
    assert_eq!(
        sublap(&["poincare-gap", "--config", path(&ou), "--out", path(&a)])
            .status
            .code(),
        Some(0)
    );
    assert_eq!(
        sublap(&["poincare-gap", "--config", path(&steeper), "--out", path(&b)])
            .status
            .code(),
        Some(0)
    );
    let out = sublap(&[
        "compare",
        path(&a.join("report.json")),
        path(&b.join("report.json")),
        "--tolerance",
        "0.01",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.lines().any(|l| l.starts_with("! /poincare_gap/lambda1")), "{text}");
}

#[test]
fn compare_rejects_schema_mismatch() {
    let tmp = tempfile::tempdir().unwrap();
    let a = tmp.path().join("a");
    assert_eq!(
        sublap(&[
            "poincare-gap",
            "--config",
            path(&shipped("ou_1d.toml")),
            "--out",
            path(&a)
        ])
        .status
        .code(),
        Some(0)
    );
    let mut v = report(&a);
    v["schema_version"] = Value::from(99);
    let other = tmp.path().join("other.json");
    std::fs::write(&other, serde_json::to_string(&v).unwrap()).unwrap();
    let out = sublap(&["compare", path(&a.join("report.json")), path(&other)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("schema version"));
}

#[test]
fn seed_override_changes_hash_and_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let ou = shipped("ou_1d.toml");
    let dirs: Vec<PathBuf> = ["a", "b", "c"].iter().map(|d| tmp.path().join(d)).collect();
    for (d, seed) in dirs.iter().zip(["11", "11", "12"]) {
        let out = sublap(&[
            "quadratic-id",
            "--config",
            path(&ou),
            "--out",
            path(d),
            "--seed",
            seed,
            "--threads",
            "2",
        ]);
        assert_eq!(out.status.code(), Some(0));
    }
    let read = |d: &Path| std::fs::read(d.join("report.json")).unwrap();
    assert_eq!(read(&dirs[0]), read(&dirs[1]));
    let (a, c) = (report(&dirs[0]), report(&dirs[2]));
    assert_eq!(a["seed"], 11);
    assert_eq!(a["threads"], 2);
    assert_ne!(a["config_hash"], c["config_hash"]);
}

#[test]
fn heisenberg_small_all_holds() {
    let tmp = tempfile::tempdir().unwrap();
    let started = Instant::now();
    let out = sublap(&[
        "all",
        "--config",
        path(&shipped("heisenberg_small.toml")),
        "--out",
        path(tmp.path()),
    ]);
    let secs = started.elapsed().as_secs_f64();
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(secs < 600.0, "took {secs} s");
    let r = report(tmp.path());
    for key in [
        "lyapunov",
        "poincare_gap",
        "improved_gap",
        "offdiag",
        "quadratic_id",
        "nonlocal",
        "covering",
    ] {
        assert!(r[key].is_object(), "missing {key}");
    }
    assert_eq!(r["all_hold"], true);
    for f in [
        "offdiag.csv",
        "quadratic.csv",
        "nets.csv",
        "overlap.csv",
        "annulus.csv",
        "eigenvalues.csv",
    ] {
        assert!(tmp.path().join(f).exists(), "missing {f}");
    }
}
