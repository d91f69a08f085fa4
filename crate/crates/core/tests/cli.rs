//! End-to-end tests of the command-line front end: exit codes, file
//! emissions, and the round trip of the solution table.

use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_merton-indivisible");

fn reference_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("model.cfg");
    std::fs::write(
        &path,
        "\
mu = 1.0
sigma = 1.0
mu_tilde = 0.5
sigma_tilde = 0.5
beta = 2.0
alpha = 0.3333333333333333

[simulate]
dt = 1e-2
horizon = 10
paths = 400
seed = 11
x0 = 2
y0 = 1
",
    )
    .unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stdout_value(out: &Output, key: &str) -> String {
    let text = String::from_utf8_lossy(&out.stdout);
    text.lines()
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_owned))
        .unwrap_or_else(|| panic!("missing key {key} in output:\n{text}"))
}

#[test]
fn validate_prints_constants() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out = run(&["--config", cfg.to_str().unwrap(), "validate"]);
    assert!(out.status.success(), "{out:?}");
    let a: f64 = stdout_value(&out, "a").parse().unwrap();
    assert!((a - 1.56006).abs() < 1e-5);
    let zbar: f64 = stdout_value(&out, "z_bar").parse().unwrap();
    assert!((zbar - 1.5).abs() < 1e-12);
}

#[test]
fn validate_rejects_small_discount_rate_with_mapped_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out = run(&["--config", cfg.to_str().unwrap(), "--beta", "0.1", "validate"]);
    assert!(!out.status.success());
    assert_eq!(out.status.code(), Some(3));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("beta_too_small"), "stderr: {err}");
    assert!(out.stdout.is_empty());
}

#[test]
fn validate_rejects_drift_violation() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--mu-tilde",
        "1.0",
        "--sigma-tilde",
        "1.0",
        "validate",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&out.stderr).contains("drift_condition"));
}

#[test]
fn missing_parameters_are_a_config_error() {
    let out = run(&["validate"]);
    assert_eq!(out.status.code(), Some(10));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn solve_writes_summary_and_round_trippable_table() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out_dir = dir.path().join("out");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "solve",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let z_hat: f64 = stdout_value(&out, "z_hat").parse().unwrap();
    assert!((z_hat - 1.3169624).abs() <= 1e-3, "z_hat = {z_hat}");
    let zbar: f64 = stdout_value(&out, "z_bar").parse().unwrap();
    assert!((zbar - 1.5).abs() < 1e-12);
    assert_eq!(stdout_value(&out, "classification"), "global_within_bounds");

    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("z_hat="));
    assert!(summary.contains("iterations="));

    // 17-significant-digit emission reproduces the doubles exactly, so two
    // reads of the same file agree bit-for-bit with the solver output.
    let table_path = out_dir.join("k_table.csv");
    let text = std::fs::read_to_string(&table_path).unwrap();
    let mut lines = text.lines();
    assert_eq!(
        lines.next().unwrap(),
        "z,K,Kprime,B_lower,B_upper,C_upper"
    );
    let first = lines.next().unwrap();
    let z0: f64 = first.split(',').next().unwrap().parse().unwrap();
    assert_eq!(z0, z_hat);

    let rows = merton_indivisible::table::read_k_table(&table_path).unwrap();
    assert!(rows.len() > 1000);
    for w in rows.windows(2) {
        assert!(w[1].z > w[0].z);
    }
}

#[test]
fn shoot_reports_classification() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out_dir = dir.path().join("shot");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "shoot",
        "--z-star",
        "1.0",
    ]);
    assert!(out.status.success());
    let kind = stdout_value(&out, "classification");
    assert!(
        kind == "upper_envelope_violation" || kind == "derivative_upper_violation",
        "kind = {kind}"
    );
    assert!(out_dir.join("k_shot.csv").exists());
}

#[test]
fn sweep_reproduces_reference_candidates() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out_dir = dir.path().join("sweep");
    // First solve to get z_hat, then sweep the five reference candidates.
    let solve_out = run(&["--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap(), "solve"]);
    let z_hat = stdout_value(&solve_out, "z_hat");
    let list = format!("1.0,1.31696,{z_hat},1.31697,1.5");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "sweep",
        "--z-stars",
        &list,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let classification = std::fs::read_to_string(out_dir.join("classification.csv")).unwrap();
    let rows: Vec<&str> = classification.lines().collect();
    assert_eq!(rows[0], "z_star,classification,z_event");
    assert_eq!(rows.len(), 6);
    // Middle candidate is the accepted boundary.
    assert!(rows[3].contains("global_within_bounds"), "{}", rows[3]);
    for i in 1..=5 {
        assert!(out_dir.join(format!("k_{i}.csv")).exists());
    }

    // The accepted trajectory stays strictly above the lower envelope.
    let k3 = merton_indivisible::table::read_k_table(&out_dir.join("k_3.csv")).unwrap();
    assert!(k3.iter().skip(1).all(|r| r.k > r.b_lower));
}

#[test]
fn sweep_with_no_candidates_writes_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out_dir = dir.path().join("empty");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "sweep",
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(out_dir.join("classification.csv")).unwrap();
    assert_eq!(text, "z_star,classification,z_event\n");
}

#[test]
fn eval_prints_policy_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "eval",
        "--x",
        "1.0",
        "--y",
        "1.0",
    ]);
    assert!(out.status.success());
    let value: f64 = stdout_value(&out, "value").parse().unwrap();
    assert!((value - 1.96555).abs() < 1e-4, "value = {value}");
    assert_eq!(stdout_value(&out, "should_sell"), "true");

    let out = run(&["--config", cfg.to_str().unwrap(), "eval", "--x", "2.0", "--y", "1.0"]);
    assert_eq!(stdout_value(&out, "should_sell"), "false");
}

#[test]
fn eval_beyond_domain_maps_to_out_of_range() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "eval",
        "--x",
        "1000.0",
        "--y",
        "1.0",
    ]);
    assert_eq!(out.status.code(), Some(7));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("out_of_range"), "stderr: {err}");
    assert!(err.contains("1000"), "stderr should name the ratio: {err}");
}

#[test]
fn simulate_reports_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out_dir = dir.path().join("sim");
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        out_dir.to_str().unwrap(),
        "simulate",
        "--per-path",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let mean: f64 = stdout_value(&out, "mean").parse().unwrap();
    let stderr: f64 = stdout_value(&out, "stderr").parse().unwrap();
    // Coarse run from the config file: agreement with the solved value
    // within 5 standard errors plus discretization allowance at dt = 1e-2.
    let eval_out = run(&["--config", cfg.to_str().unwrap(), "eval", "--x", "2", "--y", "1"]);
    let value: f64 = stdout_value(&eval_out, "value").parse().unwrap();
    assert!(
        (mean - value).abs() < 5.0 * stderr + 0.05,
        "mean = {mean}, value = {value}, stderr = {stderr}"
    );
    assert_eq!(stdout_value(&out, "n_paths"), "400");

    let per_path = std::fs::read_to_string(out_dir.join("per_path.csv")).unwrap();
    assert_eq!(per_path.lines().count(), 401);
    assert_eq!(per_path.lines().next().unwrap(), "path,payoff,sold,steps");
}

#[test]
fn cli_flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = reference_config(dir.path());
    let out = run(&[
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.4",
        "validate",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let a: f64 = stdout_value(&out, "a").parse().unwrap();
    // bracket = (2 - 0.4 + 0.12) / 0.6; A = bracket^(alpha-1) / alpha.
    let expected = (1.72f64 / 0.6).powf(-0.6) / 0.4;
    assert!((a - expected).abs() < 1e-12, "a = {a}, expected {expected}");
}
