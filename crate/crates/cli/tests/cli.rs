use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn hwidths(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hwidths"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_owned()
}

const SWEEP: &str = r#"{
  "instance": {"type": "h_tree", "theta": 1.0, "m_star": 1, "depth": 7},
  "weights": {"kappa_u": 0.5, "kappa_w": 0.5, "m_star": 1},
  "p": 2.0, "q": 2.0, "kind": "linear",
  "seed": 3
}"#;

#[test]
fn generate_tree_is_deterministic() {
    let a = hwidths(&["generate-tree", "--depth", "5", "--theta", "1.5", "--seed", "9"]);
    let b = hwidths(&["generate-tree", "--depth", "5", "--theta", "1.5", "--seed", "9"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert!(stdout(&a).starts_with("0 -1\n"));
}

#[test]
fn widths_csv_schema_and_determinism() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SWEEP);
    let a = hwidths(&["widths", "--config", &cfg]);
    assert!(a.status.success(), "{}", String::from_utf8_lossy(&a.stderr));
    let text = stdout(&a);
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "n,width,lower_bound,upper_bound,kind,predicted");
    assert_eq!(lines.count(), 9);
    let out = dir.path().join("rows.csv");
    let b = hwidths(&["widths", "--config", &cfg, "--out", out.to_str().unwrap()]);
    assert!(b.status.success());
    assert_eq!(fs::read_to_string(&out).unwrap(), text);
}

#[test]
fn fit_passes_and_fails_by_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SWEEP);
    let ok = hwidths(&["fit", "--config", &cfg]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stderr));
    let fit: serde_json::Value = serde_json::from_slice(&ok.stdout).unwrap();
    assert!(fit["pass"].as_bool().unwrap());
    let strict = hwidths(&["fit", "--config", &cfg, "--tolerance", "1e-6"]);
    assert_eq!(strict.status.code(), Some(1));
}

#[test]
fn fit_from_rows_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "cfg.json", SWEEP);
    let mut rows = String::from("n,width,lower_bound,upper_bound,kind,predicted\n");
    for k in 0..9 {
        let n = 1u32 << k;
        rows.push_str(&format!("{n},{},,,linear,\n", 1.0 / n as f64));
    }
    let rows = write(dir.path(), "rows.csv", &rows);
    let out = hwidths(&["fit", "--config", &cfg, "--rows", &rows]);
    assert_eq!(out.status.code(), Some(0));
    let fit: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!((fit["slope"].as_f64().unwrap() + 1.0).abs() < 1e-12);
}

#[test]
fn exponent_reports() {
    let dir = tempfile::tempdir().unwrap();
    let sob = write(
        dir.path(),
        "sob.json",
        r#"{"p": 2, "q": 2, "r": 2, "d": 2, "theta": 1, "beta_g": 0.25, "beta_v": 0.25, "kind": "linear"}"#,
    );
    let out = hwidths(&["exponent", "--family", "sobolev", "--params", &sob]);
    assert!(out.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["selection"]["kind"], "index");
    assert_eq!(rep["selection"]["index"], 1);

    let cube = write(dir.path(), "cube.json", r#"{"p": 2, "q": 2, "r": 1, "d": 1, "kind": "kolmogorov"}"#);
    let out = hwidths(&["exponent", "--family", "cube", "--params", &cube]);
    let rep: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rep["value"], 1.0);

    let bad = write(
        dir.path(),
        "bad.json",
        r#"{"p": 2, "q": 2, "r": 1, "d": 1, "theta": 0.5, "beta_g": 5, "beta_v": 0, "kind": "linear"}"#,
    );
    let out = hwidths(&["exponent", "--family", "sobolev", "--params", &bad]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn verify_partition_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let gen = hwidths(&["generate-tree", "--depth", "8", "--theta", "1"]);
    let tree = write(dir.path(), "tree.txt", &stdout(&gen));
    let parts = dir.path().join("parts.txt");
    let out = hwidths(&[
        "verify-partition",
        "--tree",
        &tree,
        "--n",
        "8",
        "--refinement",
        "--out",
        parts.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(summary["weight_violations"], 0);
    assert_eq!(fs::read_to_string(parts).unwrap().lines().count(), 511);
}

#[test]
fn metric_discretize_path() {
    let dir = tempfile::tempdir().unwrap();
    let tree = write(dir.path(), "m.txt", "0 -1\n1 0 1.0 1 1\n2 1 0.5 2 1|0.25|3\n");
    let op = dir.path().join("op.txt");
    let out = hwidths(&[
        "metric-discretize",
        "--tree",
        &tree,
        "--p",
        "2",
        "--q",
        "2",
        "--out",
        op.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(fs::read_to_string(op).unwrap().starts_with("0 -1 "));
}

#[test]
fn input_errors_exit_two() {
    let out = hwidths(&["widths", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(out.status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "cfg.json",
        &SWEEP.replace("\"seed\": 3", "\"seed\": 3, \"grid\": [4, 2]"),
    );
    let out = hwidths(&["widths", "--config", &cfg]);
    assert_eq!(out.status.code(), Some(2));
}
