use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_freedeconv"))
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn run_stdin(args: &[&str], input: &[u8]) -> Output {
    let mut child = bin()
        .args(args)
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .expect("binary runs");
    child.stdin.take().unwrap().write_all(input).unwrap();
    child.wait_with_output().unwrap()
}

fn json(out: &Output) -> Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("stdout is json")
}

fn write(dir: &Path, name: &str, body: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, body).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn verify_permuted_negated_model_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let a = write(dir.path(), "a.json", r#"{"p":6,"d":3,"singular_values":[1.0,2.0,0.5],"sigma":0.7}"#);
    let b = write(dir.path(), "b.json", r#"{"p":6,"d":3,"singular_values":[0.5,1.0,2.0],"sigma":-0.7}"#);
    let c = write(dir.path(), "c.json", r#"{"p":6,"d":3,"singular_values":[0.5,1.0,2.0],"sigma":0.8}"#);
    let same = json(&run(&["verify", "--a", s(&a), "--b", s(&b)]));
    assert_eq!(same["verdict"], "identical");
    let diff = json(&run(&["verify", "--a", s(&a), "--b", s(&c)]));
    assert_eq!(diff["verdict"], "different");
    assert!(diff["first_difference"]["index"].is_number());
}

#[test]
fn spn_moments_recover_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"p":4,"d":2,"singular_values":[1.0,1.5],"sigma":0.5}"#);
    let moments = dir.path().join("mom.json");
    assert!(run(&["spn-moments", "--model", s(&model), "--order", "6", "--out", s(&moments)]).status.success());
    let report = json(&run(&["spn-recover", "--moments", s(&moments), "--p", "4", "--d", "2"]));
    assert!((report["sigma_sq_hat"].as_f64().unwrap() - 0.25).abs() < 1e-6);
    let atoms: Vec<f64> = serde_json::from_value(report["atoms"].clone()).unwrap();
    assert!((atoms[0] - 1.0).abs() < 1e-6 && (atoms[1] - 2.25).abs() < 1e-6, "{atoms:?}");
}

#[test]
fn boxed_with_delta_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let f = r#"{"order":4,"scalar":"rational","coeffs":["1/2","3/1","-7/3","5/1"]}"#;
    let delta = write(dir.path(), "delta.json", r#"{"order":4,"scalar":"rational","coeffs":["1","0","0","0"]}"#);
    let out = json(&run_stdin(&["convolve", "boxed", "--f", "-", "--g", s(&delta)], f.as_bytes()));
    assert_eq!(out, serde_json::from_str::<Value>(f).unwrap());
}

#[test]
fn cw_moments_rtransform_recover_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "cw.json", r#"{"p":4,"d":2,"eigenvalues":[-1.0,0.5,2.0,3.0]}"#);
    let moments = run(&["cw-moments", "--model", s(&model), "--order", "4"]);
    assert!(moments.status.success());
    let r = run_stdin(&["convolve", "rtransform", "--f", "-"], &moments.stdout);
    assert!(r.status.success());
    let rec = json(&run_stdin(&["cw-recover", "--r", "-", "--p", "4", "--d", "2"], &r.stdout));
    let eig: Vec<f64> = serde_json::from_value(rec["eigenvalues"].clone()).unwrap();
    for (g, w) in eig.iter().zip([-1.0, 0.5, 2.0, 3.0]) {
        assert!((g - w).abs() < 1e-9, "{eig:?}");
    }
}

#[test]
fn nc_lists_catalan_many() {
    let out = json(&run(&["nc", "--n", "4"]));
    assert_eq!(out.as_array().unwrap().len(), 14);
    let pairs = json(&run(&["nc", "--n", "3", "--kreweras"]));
    assert_eq!(pairs.as_array().unwrap().len(), 5);
}

#[test]
fn density_writes_csv_and_sidecar() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"p":2,"d":1,"singular_values":[1.0],"sigma":0.5}"#);
    let csv = dir.path().join("rho.csv");
    let out = run(&["spn-density", "--model", s(&model), "--points", "400", "--out", s(&csv)]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text.lines().next(), Some("x,rho"));
    assert_eq!(text.lines().count(), 401);
    let meta: Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("rho.csv.json")).unwrap()).unwrap();
    for key in ["mass", "epsilon", "max_residual", "max_iterations_used"] {
        assert!(meta[key].is_number(), "{key}");
    }
    assert!((meta["mass"].as_f64().unwrap() - 1.0).abs() < 0.05);
}

#[test]
fn simulate_reports_moment_errors() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "cw.json", r#"{"p":3,"d":6,"eigenvalues":[1.0,2.0,3.0]}"#);
    let args = ["simulate", "--model", s(&model), "--kind", "cw", "--trials", "20", "--order", "3", "--dim-scale", "10"];
    let out = json(&run(&args));
    assert_eq!(out["relative_errors"].as_array().unwrap().len(), 3);
    assert!(out["relative_errors"][0].as_f64().unwrap().abs() < 0.05);
    assert_eq!(out, json(&run(&args)), "seeded runs repeat");
}

#[test]
fn domain_error_is_json_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let model = write(dir.path(), "m.json", r#"{"p":1,"d":2,"singular_values":[1.0,2.0],"sigma":0.5}"#);
    let out = run(&["spn-moments", "--model", s(&model)]);
    assert_eq!(out.status.code(), Some(1));
    let err: Value = serde_json::from_slice(&out.stderr).expect("stderr is json");
    for key in ["code", "message", "module"] {
        assert!(err[key].is_string(), "{key}");
    }
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["verify", "--a", "/nonexistent/a.json", "--b", "/nonexistent/b.json"]).status.code(), Some(2));
    assert_eq!(run(&["nc"]).status.code(), Some(2));
    assert_eq!(run(&["convolve", "boxed", "--f", "-"]).status.code(), Some(2));
    assert_eq!(run(&["nc", "--n", "3", "--out", "/nonexistent/dir/x.json"]).status.code(), Some(2));
}
