use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn skl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skl"))
        .args(args)
        .env("SKL_THREADS", "2")
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn write(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, serde_json::to_string(value).unwrap()).unwrap();
    path.display().to_string()
}

#[test]
fn cpv_of_half_power() {
    let out = skl(&["cpv", "--family", "power_model", "--alpha", "0.5"]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "cpv");
    assert_eq!(r["result"]["converged"], true);
    assert!((r["result"]["limit"].as_f64().unwrap() - 4.0).abs() < 1e-6);
    assert_eq!(r["seed"], 0x5EED);
    assert!(r["runtime_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn cpv_divergence_exit_status() {
    for alpha in ["1", "1.5"] {
        let out = skl(&["cpv", "--family", "power_model", "--alpha", alpha]);
        assert_eq!(out.status.code(), Some(3), "alpha {alpha}");
        let r = report(&out);
        assert_eq!(r["result"]["converged"], false);
        assert_eq!(r["result"]["divergence_end"], "AT_ZERO");
    }
}

#[test]
fn threshold_of_space_cauchy() {
    let r = report(&skl(&["threshold", "--family", "cauchy", "--n", "3"]));
    assert_eq!(r["result"]["p_star"], "3/2");
    assert_eq!(r["result"]["q_star"], "3");
    assert_eq!(r["result"]["hilbert_viable"], true);
}

#[test]
fn threshold_equal_order_case() {
    let r = report(&skl(&[
        "threshold",
        "--family",
        "dirac_iterate",
        "--n",
        "3",
        "--l",
        "3",
        "--equal-order-case",
    ]));
    assert_eq!(r["result"]["q_range"], "(1,3/2)");
    assert_eq!(r["result"]["hilbert_viable"], false);
    // without the flag the order violates l < n
    let out = skl(&["threshold", "--family", "dirac_iterate", "--n", "3", "--l", "3"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn threshold_target_q() {
    let r = report(&skl(&["threshold", "--family", "cauchy", "--n", "2", "--target-q", "2"]));
    assert_eq!(r["result"]["viable"], false);
    let r = report(&skl(&["threshold", "--family", "laplace_iterate", "--n", "2", "--weight", "6"]));
    assert_eq!(r["result"]["p_star"], "2");
    assert_eq!(r["result"]["q_star"], "2");
}

#[test]
fn validation_errors_exit_two() {
    assert_eq!(skl(&["threshold", "--family", "cauchy", "--n", "1"]).status.code(), Some(2));
    assert_eq!(skl(&["threshold"]).status.code(), Some(2));
    assert_eq!(skl(&["norm", "--family", "cauchy", "--n", "2"]).status.code(), Some(2));
    assert_eq!(skl(&["bogus"]).status.code(), Some(2));
    assert_eq!(skl(&[]).status.code(), Some(2));
    assert_eq!(
        skl(&["classify", "--family", "cauchy", "--n", "2", "--weight", "-1"]).status.code(),
        Some(2)
    );
}

#[test]
fn classify_reports_class() {
    let r = report(&skl(&["classify", "--family", "laplace_iterate", "--n", "2", "--weight", "2"]));
    assert_eq!(r["result"]["class"], "SINGULAR");
    assert_eq!(r["result"]["effective_degree"], "2");
    let r = report(&skl(&["classify", "--family", "laplace_iterate", "--n", "2"]));
    assert_eq!(r["result"]["class"], "HYPER");
    let r = report(&skl(&["classify", "--family", "cauchy", "--n", "3"]));
    assert_eq!(r["result"]["class"], "WEAK");
}

#[test]
fn config_file_with_flag_override() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = serde_json::json!({
        "command": "threshold",
        "kernel": {"family": "cauchy", "n": 2}
    });
    let path = write(dir.path(), "cfg.json", &cfg);
    let r = report(&skl(&["--config", &path]));
    assert_eq!(r["result"]["p_star"], "2");
    let r = report(&skl(&["--config", &path, "--n", "4"]));
    assert_eq!(r["result"]["p_star"], "4/3");
    assert_eq!(r["config"]["kernel"]["n"], 4);
}

#[test]
fn norm_divergence_and_finite_value() {
    let out = skl(&["norm", "--family", "cauchy", "--n", "2", "--p", "2", "--domain-kind", "exterior", "--r-in", "0.5"]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(report(&out)["result"]["value"], "inf");
    let out = skl(&["norm", "--family", "cauchy", "--n", "2", "--p", "3"]);
    assert_eq!(out.status.code(), Some(0));
    let v = report(&out)["result"]["value"].as_f64().unwrap();
    let expected = (2.0 * std::f64::consts::PI).powi(-2).powf(1.0 / 3.0);
    assert!((v - expected).abs() < 1e-14);
}

#[test]
fn monte_carlo_replay_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mc.json").display().to_string();
    let out = skl(&[
        "norm", "--family", "laplace_iterate", "--n", "3", "--p", "1.5", "--domain-kind", "annulus",
        "--r-in", "1", "--r-out", "2", "--method", "monte_carlo", "--proposal", "volume",
        "--samples", "50000", "--seed", "7", "--output", &path,
    ]);
    assert_eq!(out.status.code(), Some(0));
    let first: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(first["seed"], 7);
    let replayed = report(&skl(&["--replay", &path]));
    assert_eq!(replayed["result"], first["result"]);
    let single = Command::new(env!("CARGO_BIN_EXE_skl"))
        .args(["--replay", &path])
        .env("SKL_THREADS", "1")
        .output()
        .unwrap();
    assert_eq!(report(&single)["result"], first["result"]);
}

#[test]
fn every_report_reparses() {
    let runs: [&[&str]; 4] = [
        &["classify", "--family", "dirac_iterate", "--n", "4", "--l", "2", "--theta", "2.5"],
        &["threshold", "--family", "laplace_iterate", "--n", "3"],
        &["cpv", "--family", "power_model", "--alpha", "0.25"],
        &["norm", "--family", "cauchy", "--n", "3", "--p", "2"],
    ];
    let dir = tempfile::tempdir().unwrap();
    for args in runs {
        let first = report(&skl(args));
        let path = write(dir.path(), "r.json", &first);
        let again = report(&skl(&["--replay", &path]));
        assert_eq!(again["result"], first["result"], "{args:?}");
        assert_eq!(again["config"], first["config"]);
    }
}

#[test]
fn grid_norm_holder_and_scan() {
    let dir = tempfile::tempdir().unwrap();
    let n = 9;
    let values: Vec<Vec<f64>> = (0..n * n)
        .map(|i| {
            let x = -1.0 + 2.0 * (i / n) as f64 / (n - 1) as f64;
            let y = -1.0 + 2.0 * (i % n) as f64 / (n - 1) as f64;
            let r2 = x * x + y * y;
            let v = if r2 < 1.0 { (-1.0 / (1.0 - r2)).exp() } else { 0.0 };
            vec![v, 0.0, 0.0, 0.0]
        })
        .collect();
    let grid = serde_json::json!({"n": 2, "box": [[-1.0, 1.0], [-1.0, 1.0]], "shape": [n, n], "values": values});
    let path = write(dir.path(), "bump.json", &grid);

    let r = report(&skl(&["norm", "--grid", &path, "--p", "2", "--k", "1"]));
    assert_eq!(r["result"]["method"], "GRID");
    assert!(r["result"]["value"].as_f64().unwrap() > 0.0);

    let r = report(&skl(&["holder", "--g", &path, "--f", &path, "--p", "2"]));
    assert_eq!(r["result"]["holds"], true);
    assert_eq!(skl(&["holder", "--g", &path, "--f", &path, "--p", "2", "--q", "3"]).status.code(), Some(2));

    let out = skl(&["scan", "--family", "cauchy", "--n", "2", "--grid", &path, "--steps", "5", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let csv = String::from_utf8(out.stdout).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("q,p,kernel_norm,f_norm,product"));
    assert_eq!(lines.count(), 5);
}

#[test]
fn teodorescu_bump_and_grid_out() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("t.json").display().to_string();
    let r = report(&skl(&[
        "teodorescu", "--family", "cauchy", "--n", "2", "--nodes", "24", "--q", "1.5", "--grid-out", &out_path,
    ]));
    assert!(r["result"]["left_inverse_residual"].as_f64().unwrap() < 0.1);
    assert_eq!(r["result"]["probe"]["all_finite"], true);
    let grid: Value = serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(grid["shape"], serde_json::json!([24, 24]));

    let out = skl(&["teodorescu", "--family", "cauchy", "--n", "2", "--nodes", "12", "--q", "2"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("(1,2)"));

    let out = skl(&["teodorescu", "--family", "laplace_iterate", "--n", "2", "--nodes", "12"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_all_passes() {
    let out = skl(&["verify-all"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 49);
    assert!(text.lines().all(|l| l.starts_with("PASS ")), "{text}");
}
