use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const EXAMPLE: &str = r#"{
  "period": 1.0,
  "J": [[[0, 1], [0, 0]], [[0, 0], [0, 0]]],
  "layers": [{ "thickness": 1.0, "H": [[0, 0], [0, 0]], "W": [[1, 0], [0, 1]] }]
}"#;

const QUARTER_WAVE: &str = r#"{
  "period": 1.0,
  "layers": [
    { "thickness": 0.6666666666666666, "eps": [[1,0,0],[0,1,0],[0,0,1]], "mu": [[1,0,0],[0,1,0],[0,0,1]] },
    { "thickness": 0.3333333333333333, "eps": [[4,0,0],[0,4,0],[0,0,4]], "mu": [[1,0,0],[0,1,0],[0,0,1]] }
  ]
}"#;

fn canondae(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_canondae"))
        .args(args)
        .env_remove("CANONDAE_TOL_CIRCLE")
        .output()
        .expect("binary runs")
}

fn file(dir: &TempDir, name: &str, text: &str) -> PathBuf {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn json(bytes: &[u8]) -> Value {
    serde_json::from_slice(bytes).expect("valid JSON")
}

#[test]
fn certify_example_succeeds() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    let out = canondae(&["certify", "--stack", s(&stack)]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    assert_eq!(v["certified"], true);
    assert_eq!(v["self_adjoint"], true);
    assert_eq!(v["infinite_multiplicity_candidates"][0], 0.0);
}

#[test]
fn check_at_zero_reports_singular_h22() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    let out = canondae(&["check", "--stack", s(&stack), "--z0", "0,0"]);
    assert_eq!(out.status.code(), Some(2));
    let diag = json(&out.stderr);
    assert_eq!(diag["error"], "Index1Failed");
    assert!(diag["failures"][0].as_str().unwrap().contains("_22 invertible"));
    let report = json(&out.stdout);
    assert_eq!(report["passed"], false);
    assert_eq!(report["conditions"][0]["witness"]["sigma_min"], 0.0);
}

#[test]
fn check_at_i_passes_in_every_mode() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    for mode in ["definition", "simplified", "pencil", "sufficient"] {
        let out = canondae(&["check", "--stack", s(&stack), "--z0", "0,1", "--mode", mode]);
        assert_eq!(out.status.code(), Some(0), "{mode}");
    }
}

#[test]
fn input_errors_exit_two() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    let bad = file(&dir, "bad.json", r#"{ "J": [[1]], "layers": [] }"#);
    let cases: Vec<Vec<&str>> = vec![
        vec!["check", "--stack", s(&stack), "--z0", "zero"],
        vec!["check", "--stack", s(&stack), "--mode", "bogus"],
        vec!["certify", "--stack", s(&stack), "--z0", "1,0"],
        vec!["validate", "--stack", s(&bad)],
        vec!["validate", "--stack", "/nonexistent/stack.json"],
        vec!["bands", "--stack", s(&stack), "--lmin", "2", "--lmax", "1", "--num", "5"],
    ];
    for args in cases {
        let out = canondae(&args);
        assert_eq!(out.status.code(), Some(2), "{args:?}");
        let diag = json(&out.stderr);
        assert!(diag["message"].is_string(), "{args:?}");
    }
}

#[test]
fn parse_errors_carry_schema_help() {
    let dir = TempDir::new().unwrap();
    let bad = file(&dir, "bad.json", "{ not json");
    let out = canondae(&["validate", "--stack", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(json(&out.stderr)["schema"].as_str().unwrap().contains("layers"));
}

#[test]
fn monodromy_of_example_is_a_phase() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    let out = canondae(&["monodromy", "--stack", s(&stack), "--lambda", "2,0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = json(&out.stdout);
    let re = v["M"][0][0][0].as_f64().unwrap();
    let im = v["M"][0][0][1].as_f64().unwrap();
    assert!((re - 2f64.cos()).abs() < 1e-12 && (im + 2f64.sin()).abs() < 1e-12);
}

#[test]
fn ivp_writes_csv_to_output_file() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    let f0 = file(&dir, "f0.json", "[[0, 1], [0, 0]]");
    let out_path = dir.path().join("traj.csv");
    let out = canondae(&[
        "ivp", "--stack", s(&stack), "--t0", "0", "--t1", "1", "--f0", s(&f0), "--lambda", "1,0", "--samples", "5", "-o", s(&out_path),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let csv = std::fs::read_to_string(out_path).unwrap();
    assert_eq!(csv.lines().count(), 6);
    assert!(csv.starts_with("t,"));
}

#[test]
fn maxwell_bands_show_the_quarter_wave_gap() {
    let dir = TempDir::new().unwrap();
    let mat = file(&dir, "qw.json", QUARTER_WAVE);
    let out = canondae(&["maxwell-bands", "--materials", s(&mat), "--wmin", "1", "--wmax", "3.5", "--num", "6"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let counts: Vec<&str> = text.lines().skip(1).map(|l| l.split(',').nth(1).unwrap()).collect();
    assert_eq!(counts, ["4", "4", "0", "0", "4", "4"]);
}

#[test]
fn maxwell_stack_round_trips_through_bands() {
    let dir = TempDir::new().unwrap();
    let mat = file(&dir, "qw.json", QUARTER_WAVE);
    let stack = dir.path().join("qw_stack.json");
    let out = canondae(&["maxwell-stack", "--materials", s(&mat), "-o", s(&stack)]);
    assert_eq!(out.status.code(), Some(0));
    let summary = dir.path().join("summary.json");
    let a = canondae(&[
        "bands", "--stack", s(&stack), "--lmin", "1", "--lmax", "3.5", "--num", "26", "--summary", s(&summary),
    ]);
    assert_eq!(a.status.code(), Some(0));
    let edges = json(&std::fs::read(&summary).unwrap())["edges"].clone();
    assert_eq!(edges.as_array().unwrap().len(), 2);
    let b = canondae(&["bands", "--materials", s(&mat), "--lmin", "1", "--lmax", "3.5", "--num", "26"]);
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn outputs_are_byte_identical_across_runs_and_thread_counts() {
    let dir = TempDir::new().unwrap();
    let mat = file(&dir, "qw.json", QUARTER_WAVE);
    let args = ["bands", "--materials", s(&mat), "--lmin", "0.5", "--lmax", "6", "--num", "40"];
    let first = canondae(&args);
    let again = canondae(&args);
    let mut single = args.to_vec();
    single.extend(["--threads", "1"]);
    let single = canondae(&single);
    assert_eq!(first.status.code(), Some(0));
    assert_eq!(first.stdout, again.stdout);
    assert_eq!(first.stdout, single.stdout);
}

#[test]
fn tol_circle_env_is_read() {
    let dir = TempDir::new().unwrap();
    let stack = file(&dir, "example1.json", EXAMPLE);
    let out = Command::new(env!("CARGO_BIN_EXE_canondae"))
        .args(["monodromy", "--stack", s(&stack), "--lambda", "1,0"])
        .env("CANONDAE_TOL_CIRCLE", "not-a-number")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_quick_passes_and_repeats() {
    let a = canondae(&["selftest", "--quick", "--seed", "7"]);
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    assert_eq!(json(&a.stdout)["passed"], true);
    let b = canondae(&["selftest", "--quick", "--seed", "7"]);
    assert_eq!(a.stdout, b.stdout);
}
