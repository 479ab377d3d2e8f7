//! End-to-end tests of the command line interface: output contents and the
//! exit-code contract (0 ok, 2 bad input, 3 precondition, 4 numerical).

use std::io::Write;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

const TRIANGLE: &str = r#"{
  "p": 4.0,
  "vertices": [{"id": "u"}, {"id": "v"}, {"id": "w"}],
  "edges": [
    {"u": "u", "v": "v"},
    {"u": "u", "v": "w"},
    {"u": "v", "v": "w"}
  ],
  "cut": [["u", "v"]]
}"#;

const PATH2: &str = r#"{
  "p": 4.0,
  "vertices": [{"id": "a"}, {"id": "b"}],
  "edges": [{"u": "a", "v": "b"}]
}"#;

fn write_file(dir: &TempDir, name: &str, contents: &str) -> std::path::PathBuf {
    let path = dir.path().join(name);
    let mut f = std::fs::File::create(&path).unwrap();
    f.write_all(contents.as_bytes()).unwrap();
    path
}

fn pcut(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pcut"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(args: &[&str]) -> String {
    let out = pcut(args);
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn exit_code(args: &[&str]) -> i32 {
    pcut(args).status.code().expect("exit code")
}

fn lambdas(stdout: &str) -> Vec<f64> {
    let rows: Vec<serde_json::Value> = serde_json::from_str(stdout).unwrap();
    rows.iter().map(|r| r["lambda"].as_f64().unwrap()).collect()
}

#[test]
fn newton_spectrum_of_the_triangle() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let out = run_ok(&[
        "spectrum",
        g.to_str().unwrap(),
        "--method",
        "newton",
        "--seeds",
        "200",
        "--rng-seed",
        "1",
    ]);
    let third = (1.0 + 2f64.cbrt()).powi(3);
    let mut distinct: Vec<f64> = Vec::new();
    for l in lambdas(&out) {
        if !distinct.iter().any(|d| (d - l).abs() < 1e-3) {
            distinct.push(l);
        }
    }
    assert_eq!(distinct.len(), 3, "{distinct:?}");
    assert!(distinct.iter().any(|l| l.abs() < 1e-3));
    assert!(distinct.iter().any(|l| (l - 9.0).abs() < 1e-3));
    assert!(distinct.iter().any(|l| (l - third).abs() < 1e-3));
}

#[test]
fn tree_spectrum_of_the_two_vertex_path() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "path2.json", PATH2);
    let out = run_ok(&["spectrum", g.to_str().unwrap(), "--method", "tree"]);
    let ls = lambdas(&out);
    assert_eq!(ls.len(), 2, "{ls:?}");
    assert!(ls[0].abs() < 1e-10);
    assert!((ls[1] - 8.0).abs() < 1e-10);
}

#[test]
fn tree_method_rejects_graphs_with_cycles() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    assert_eq!(exit_code(&["spectrum", g.to_str().unwrap(), "--method", "tree"]), 3);
}

#[test]
fn tree_method_works_after_cutting() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let out = run_ok(&[
        "spectrum",
        g.to_str().unwrap(),
        "--method",
        "tree",
        "--alpha",
        "-1",
    ]);
    let ls = lambdas(&out);
    assert!(ls.iter().any(|l| (l - 9.0).abs() < 1e-9), "{ls:?}");
    assert!(ls.iter().any(|l| (l - 16.0).abs() < 1e-9), "{ls:?}");
}

#[test]
fn trace_certifies_the_triangle_critical_values() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let csv = dir.path().join("curves.csv");
    let json = dir.path().join("critical.json");
    let stdout = run_ok(&[
        "trace",
        g.to_str().unwrap(),
        "--alpha-min",
        "-3",
        "--alpha-max",
        "3",
        "--points",
        "400",
        "--out-csv",
        csv.to_str().unwrap(),
        "--out-json",
        json.to_str().unwrap(),
    ]);
    assert!(stdout.contains("lambda*"));

    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    let points = doc["critical_points"].as_array().unwrap();
    let third = (1.0 + 2f64.cbrt()).powi(3);
    let certified: Vec<(f64, f64)> = points
        .iter()
        .filter(|p| p["certified"].as_bool().unwrap())
        .map(|p| (p["lambda"].as_f64().unwrap(), p["alpha"].as_f64().unwrap()))
        .collect();
    assert!(certified.iter().any(|(l, a)| (l - 9.0).abs() < 1e-6 && (a + 1.0).abs() < 1e-6));
    assert!(certified
        .iter()
        .any(|(l, a)| (l - third).abs() < 1e-4 && (a + 2f64.cbrt()).abs() < 1e-4));
    assert!(certified
        .iter()
        .any(|(l, a)| (l - third).abs() < 1e-4 && (a + 2f64.powf(-1.0 / 3.0)).abs() < 1e-4));

    let header = std::fs::read_to_string(&csv).unwrap();
    assert!(header.starts_with("alpha,branch,lambda,slope\n"));
    assert!(header.lines().count() > 500);
}

#[test]
fn trace_reports_nothing_on_a_monotone_stretch() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let csv = dir.path().join("curves.csv");
    let json = dir.path().join("critical.json");
    let stdout = run_ok(&[
        "trace",
        g.to_str().unwrap(),
        "--alpha-min",
        "2",
        "--alpha-max",
        "2.7",
        "--points",
        "60",
        "--out-csv",
        csv.to_str().unwrap(),
        "--out-json",
        json.to_str().unwrap(),
    ]);
    assert!(stdout.contains("no critical points in range"));
    let doc: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(doc["critical_points"].as_array().unwrap().is_empty());
}

#[test]
fn hf_vanishes_at_the_critical_parameter() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let out = run_ok(&["hf", g.to_str().unwrap(), "--alpha", "-1", "--lambda", "9"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert!((doc["lambda"].as_f64().unwrap() - 9.0).abs() < 1e-10);
    assert!(doc["dlambda_dalpha"].as_f64().unwrap().abs() < 1e-8);
    assert!(doc["fd_check"].as_f64().unwrap().abs() < 1e-6);
}

#[test]
fn hf_matches_finite_differences_on_a_moving_branch() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    // locate the top branch at alpha = 0.5, then differentiate there
    let spectrum = run_ok(&[
        "spectrum",
        g.to_str().unwrap(),
        "--method",
        "tree",
        "--alpha",
        "0.5",
    ]);
    let top = lambdas(&spectrum).into_iter().fold(f64::MIN, f64::max);
    let out = run_ok(&[
        "hf",
        g.to_str().unwrap(),
        "--alpha",
        "0.5",
        "--lambda",
        &format!("{top}"),
    ]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    let hf = doc["dlambda_dalpha"].as_f64().unwrap();
    let fd = doc["fd_check"].as_f64().unwrap();
    assert!((hf - fd).abs() <= 1e-6 * hf.abs().max(fd.abs()), "hf {hf} fd {fd}");
}

#[test]
fn hf_rejects_the_forbidden_parameter() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    assert_eq!(exit_code(&["hf", g.to_str().unwrap(), "--alpha", "0", "--lambda", "9"]), 2);
}

#[test]
fn hf_fails_cleanly_away_from_the_spectrum() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    assert_eq!(exit_code(&["hf", g.to_str().unwrap(), "--alpha", "-1", "--lambda", "5"]), 4);
}

#[test]
fn regularity_report_for_the_zero_pattern_eigenpair() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let out = run_ok(&["regularity", g.to_str().unwrap(), "--lambda", "9", "--f", "1,-1,0"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["kernel_dim"].as_u64().unwrap(), 1);
    assert_eq!(doc["is_regular"].as_bool().unwrap(), true);
}

#[test]
fn regularity_report_for_the_constant_eigenpair() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    let out = run_ok(&["regularity", g.to_str().unwrap(), "--lambda", "0", "--f", "1,1,1"]);
    let doc: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(doc["kernel_dim"].as_u64().unwrap(), 3);
    assert_eq!(doc["is_regular"].as_bool().unwrap(), false);
}

#[test]
fn regularity_rejects_non_eigenpairs() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "triangle.json", TRIANGLE);
    assert_eq!(
        exit_code(&["regularity", g.to_str().unwrap(), "--lambda", "5", "--f", "1,-1,0"]),
        4
    );
}

#[test]
fn malformed_documents_exit_with_two() {
    let dir = TempDir::new().unwrap();
    let g = write_file(&dir, "bad.json", "{ not json");
    assert_eq!(exit_code(&["spectrum", g.to_str().unwrap()]), 2);
    let missing = Path::new("/nonexistent/graph.json");
    assert_eq!(exit_code(&["spectrum", missing.to_str().unwrap()]), 2);
}
