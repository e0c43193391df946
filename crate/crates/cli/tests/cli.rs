use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_newton-incl"));
    c.env_remove("NEWTON_INCL_SEED");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn code(args: &[&str]) -> i32 {
    run(args).status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json_without_timing(o: &Output) -> Value {
    let mut v: Value = serde_json::from_slice(&o.stdout).expect("json on stdout");
    assert_eq!(v["schema_version"], 1);
    assert!(v["timing_ms"].as_f64().is_some());
    v.as_object_mut().unwrap().remove("timing_ms");
    v
}

fn scratch(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("newton-incl-cli-{}-{name}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

#[test]
fn solve_sqrt2_converges_quickly() {
    let o = run(&["solve", "sqrt2", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_without_timing(&o);
    let residuals = v["trace"]["residuals"].as_array().unwrap();
    assert!(residuals.len() - 1 <= 5);
    assert!(residuals.last().unwrap().as_f64().unwrap() <= 1e-10);
    assert_eq!(v["trace"]["status"], "converged_residual");
}

#[test]
fn far_start_does_not_report_success() {
    let c = code(&["solve", "sqrt2", "--x0", "1000", "--max-iter", "5"]);
    assert_eq!(c, 2);
}

#[test]
fn malformed_problem_file_exits_one() {
    let dir = scratch("malformed");
    let path = dir.join("bad.json");
    std::fs::write(&path, "{ \"n\": 1, ").unwrap();
    let o = run(&["solve", path.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn certify_smale_with_decimal_gamma() {
    let o = run(&["certify", "sqrt2", "--family", "smale", "--gamma", "0.333333333", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_without_timing(&o);
    let alpha = v["certificate"]["hypothesis_value"].as_f64().unwrap();
    assert!((alpha - 1.0 / 36.0).abs() < 1e-9);
    assert_eq!(v["certificate"]["hypothesis_ok"], true);
}

#[test]
fn rational_flags_match_decimal_values() {
    let a = json_without_timing(&run(&["certify", "sqrt2", "--L", "2/3", "--json", "-"]));
    let b = json_without_timing(&run(&["certify", "sqrt2", "--L", "0.6666666666666666", "--json", "-"]));
    assert_eq!(a["certificate"]["t_star"], b["certificate"]["t_star"]);
}

#[test]
fn estimated_constant_is_labeled_empirical() {
    let o = run(&["certify", "sqrt2", "--family", "quadratic", "--L", "estimate", "--samples", "1000", "--seed", "7"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("empirical"));
    assert!(!text.to_lowercase().contains("guaranteed"));
    let v = json_without_timing(&run(&[
        "certify", "sqrt2", "--L", "estimate", "--samples", "1000", "--seed", "7", "--json", "-",
    ]));
    let l = v["estimate"]["value"].as_f64().unwrap();
    assert!((l - 2.0 / 3.0).abs() < 1e-9, "{l}");
    assert_eq!(v["certificate"]["empirical"], true);
}

#[test]
fn rho_above_radius_exits_four() {
    let o = run(&["certify", "sqrt2", "--L", "2/3", "--rho", "0.5"]);
    assert_eq!(o.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&o.stderr).contains("rho_max"));
}

#[test]
fn verify_exact_smale_certificate_passes() {
    assert_eq!(code(&["verify", "sqrt2", "--family", "smale", "--gamma", "1/3"]), 0);
}

#[test]
fn verify_flags_an_underestimated_constant() {
    let o = run(&["verify", "sqrt2", "--family", "quadratic", "--L", "0.01"]);
    assert_eq!(o.status.code(), Some(5));
    assert!(stdout(&o).contains("FAIL"));
}

#[test]
fn perturbed_starts_stay_in_the_ball() {
    let o = run(&["verify", "sqrt2", "--L", "2/3", "--perturb", "20", "--rho", "0.04", "--json", "-"]);
    assert_eq!(o.status.code(), Some(0));
    let v = json_without_timing(&o);
    let starts = v["starts"].as_array().unwrap();
    assert_eq!(starts.len(), 21);
    assert!(starts.iter().all(|s| s["pass"] == true));
}

#[test]
fn json_is_deterministic_across_runs_and_thread_counts() {
    let args = ["verify", "mixed-3", "--L", "estimate", "--samples", "200", "--perturb", "12", "--seed", "3", "--json", "-"];
    let one = bin().args(args).env("RAYON_NUM_THREADS", "1").output().unwrap();
    let four = bin().args(args).env("RAYON_NUM_THREADS", "4").output().unwrap();
    let again = bin().args(args).env("RAYON_NUM_THREADS", "4").output().unwrap();
    let a = serde_json::to_string(&json_without_timing(&one)).unwrap();
    let b = serde_json::to_string(&json_without_timing(&four)).unwrap();
    let c = serde_json::to_string(&json_without_timing(&again)).unwrap();
    assert_eq!(a, b);
    assert_eq!(b, c);
}

#[test]
fn seed_defaults_from_environment() {
    let with_env = bin()
        .args(["certify", "cubic", "--L", "estimate", "--samples", "50", "--json", "-"])
        .env("NEWTON_INCL_SEED", "11")
        .output()
        .unwrap();
    let with_flag = run(&["certify", "cubic", "--L", "estimate", "--samples", "50", "--seed", "11", "--json", "-"]);
    assert_eq!(json_without_timing(&with_env), json_without_timing(&with_flag));
    assert_eq!(json_without_timing(&with_flag)["estimate"]["seed"], 11);
}

#[test]
fn exported_catalog_round_trips() {
    let dir = scratch("export");
    assert_eq!(code(&["catalog", "--export", dir.to_str().unwrap()]), 0);
    let path = dir.join("system-2x2.json");
    let from_file = json_without_timing(&run(&["solve", path.to_str().unwrap(), "--json", "-"]));
    let from_name = json_without_timing(&run(&["solve", "system-2x2", "--json", "-"]));
    assert_eq!(from_file, from_name);
}

#[test]
fn help_and_usage_errors() {
    assert_eq!(code(&["--help"]), 0);
    assert_eq!(code(&["--version"]), 0);
    assert_eq!(code(&[]), 1);
    assert_eq!(code(&["certify", "sqrt2", "--family", "cubic"]), 1);
}
