//! End-to-end tests of the `heatlab` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

fn heatlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_heatlab"))
        .args(args)
        .env_remove("HEATLAB_THREADS")
        .output()
        .expect("binary runs")
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("heatlab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

/// Rows of a CSV text as string fields, without comments and header.
fn rows(text: &str) -> Vec<Vec<String>> {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_owned).collect())
        .collect()
}

fn body(text: &str) -> String {
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn poisson_density_at_origin() {
    let out = heatlab(&["--family", "poisson", "--d", "2", "kernel", "eval", "--r", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let text = stdout(&out);
    assert!(text.starts_with("# heatlab-schema v1\n"));
    let first = &rows(&text)[0];
    assert_eq!(first[0], "p_1");
    let value: f64 = first[3].parse().unwrap();
    assert!((value - 1.0 / (2.0 * std::f64::consts::PI)).abs() < 1e-12);
}

#[test]
fn stable_alpha_one_reports_poisson_closed_form() {
    let out = heatlab(&[
        "--family",
        "stable",
        "--alpha",
        "1",
        "--d",
        "2",
        "kernel",
        "eval",
        "--r",
        "0,0.5,1,3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    for row in rows(&stdout(&out)).iter().filter(|r| r[0] == "p_1") {
        let value: f64 = row[3].parse().unwrap();
        let closed: f64 = row[4].parse().unwrap();
        assert!((value - closed).abs() < 1e-8, "{row:?}");
    }
}

#[test]
fn divergent_moment_is_a_configuration_error() {
    let out = heatlab(&["--family", "stable", "--alpha", "0.5", "kernel", "eval", "--moment"]);
    assert_eq!(out.status.code(), Some(2));
    let out = heatlab(&["--family", "stable", "--alpha", "0.5", "kernel", "eval"]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn configuration_errors_exit_2() {
    for args in [
        vec!["--alpha", "2.5", "kernel", "eval"],
        vec!["--d", "3", "--shape", "box", "--sides", "1,1", "heat", "sweep"],
        vec!["--config", "/nonexistent/heatlab.toml", "config"],
        vec!["--t-grid", "1e-3,1e-2", "heat", "sweep"],
        vec!["--family", "stable", "--alpha", "0.8", "bounds"],
        vec!["--family", "stable", "--alpha", "1.3", "alpha-perimeter"],
    ] {
        let out = heatlab(&args);
        assert_eq!(
            out.status.code(),
            Some(2),
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        );
    }
    let bad = scratch("bad.toml");
    std::fs::write(&bad, "[kernel]\nfamly = \"stable\"\n").unwrap();
    let out = heatlab(&["--config", bad.to_str().unwrap(), "config"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn gaussian_box_constant() {
    let out = heatlab(&[
        "--family",
        "gaussian",
        "--shape",
        "box",
        "--sides",
        "1,1",
        "--t-grid",
        "1e-2,1e-3,1e-4",
        "heat",
        "sweep",
    ]);
    assert_eq!(out.status.code(), Some(0));
    for row in rows(&stdout(&out)) {
        let constant: f64 = row[4].parse().unwrap();
        assert!((constant - 4.0 / std::f64::consts::PI.sqrt()).abs() < 1e-14);
    }
}

#[test]
fn sweep_writes_csv_and_summary() {
    let path = scratch("stable.csv");
    let out = heatlab(&[
        "--family",
        "stable",
        "--alpha",
        "1.5",
        "heat",
        "sweep",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = std::fs::read_to_string(&path).unwrap();
    assert_eq!(rows(&text).len(), 5);
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("summary.json")).unwrap()).unwrap();
    assert!(summary["extrapolated_rel_error"].as_f64().unwrap() <= 0.05);
    assert_eq!(summary["logarithmic"], false);

    let path = scratch("poisson.csv");
    let out = heatlab(&[
        "--family",
        "stable",
        "--alpha",
        "1",
        "heat",
        "sweep",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(path.with_extension("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["logarithmic"], true);
    assert_eq!(summary["theoretical_constant"], 2.0);
}

#[test]
fn config_round_trip_is_idempotent() {
    let first = heatlab(&["--family", "poisson", "--d", "3", "--t-grid", "0.1,0.01", "config"]);
    assert_eq!(first.status.code(), Some(0));
    let path = scratch("round.toml");
    std::fs::write(&path, &first.stdout).unwrap();
    let second = heatlab(&["--config", path.to_str().unwrap(), "config"]);
    assert_eq!(second.status.code(), Some(0));
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn repeated_runs_are_identical() {
    let args = [
        "--family",
        "stable",
        "--alpha",
        "0.5",
        "--shape",
        "box",
        "--sides",
        "1,2",
        "--samples",
        "20000",
        "--seed",
        "5",
        "alpha-perimeter",
    ];
    let a = heatlab(&args);
    let b = heatlab(&args);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(body(&stdout(&a)), body(&stdout(&b)));
    assert!(stdout(&a).contains("# seed: 5"));

    let sweep = [
        "--family", "stable", "--alpha", "1.2", "--shape", "box", "--sides", "1,1", "heat", "sweep",
    ];
    assert_eq!(body(&stdout(&heatlab(&sweep))), body(&stdout(&heatlab(&sweep))));
}

#[test]
fn thread_count_does_not_change_results() {
    let args = [
        "--family",
        "stable",
        "--alpha",
        "0.5",
        "--samples",
        "50000",
        "alpha-perimeter",
    ];
    let run = |threads: &str| {
        Command::new(env!("CARGO_BIN_EXE_heatlab"))
            .args(args)
            .env("HEATLAB_THREADS", threads)
            .output()
            .unwrap()
    };
    let one = run("1");
    let three = run("3");
    assert_eq!(one.status.code(), Some(0));
    assert_eq!(body(&stdout(&one)), body(&stdout(&three)));
    assert_eq!(run("zero").status.code(), Some(2));
    assert_eq!(run("0").status.code(), Some(2));
}

#[test]
fn quick_verify_exit_code_matches_report() {
    let path = scratch("verify.json");
    let out = heatlab(&["--quick", "verify", "--out", path.to_str().unwrap(), "--format", "json"]);
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let passed = report["all_passed"].as_bool().unwrap();
    assert_eq!(out.status.code(), Some(if passed { 0 } else { 4 }));
    assert_eq!(report["criteria"].as_array().unwrap().len(), 17);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(
        stderr
            .lines()
            .filter(|l| l.starts_with("[PASS]") || l.starts_with("[FAIL]"))
            .count(),
        17
    );
}

#[test]
fn loose_tolerance_fails_verification() {
    let path = scratch("loose.json");
    let out = heatlab(&[
        "--quick",
        "--abs-tol",
        "1",
        "verify",
        "--out",
        path.to_str().unwrap(),
        "--format",
        "json",
    ]);
    assert_eq!(out.status.code(), Some(4));
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let failures: Vec<u64> = report["failures"]
        .as_array()
        .unwrap()
        .iter()
        .map(|v| v.as_u64().unwrap())
        .collect();
    assert!(failures.contains(&1), "{failures:?}");
}
