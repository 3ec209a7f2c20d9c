use std::process::{Command, Output};

use serde_json::Value;

const BIN: &str = env!("CARGO_BIN_EXE_qmcompress");

fn data(name: &str) -> String {
    format!("{}/../core/data/{name}", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

#[test]
fn example_one_and_two_gains() {
    for (id, gain) in [("1", -0.4844), ("2", -0.9039)] {
        let out = run(&["example", id]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        let g = json(&out)["gain_indicator"].as_f64().unwrap();
        assert!((g - gain).abs() <= 5e-4, "example {id}: {g}");
    }
}

#[test]
fn example_three_writes_surface_csv() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("surface.csv");
    let out = run(&["example", "3", "--csv", csv.to_str().unwrap()]);
    assert!(out.status.success());
    let summary = &json(&out)["summary"];
    assert!(summary["sign_changes"].as_u64().unwrap() > 0);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert!(text.starts_with("theta1,theta2,theta3,valid,gain_indicator"));
    assert_eq!(text.lines().count(), 1 + 41 * 41 * 41);
}

#[test]
fn rates_matches_bundled_file_and_out_flag() {
    let dir = tempfile::tempdir().unwrap();
    let dest = dir.path().join("rates.json");
    let out = run(&["rates", &data("example1.json"), "--out", dest.to_str().unwrap()]);
    assert!(out.status.success());
    assert!(out.stdout.is_empty());
    let report: Value = serde_json::from_str(&std::fs::read_to_string(dest).unwrap()).unwrap();
    let gap = report["unstructured_sum_rhs"].as_f64().unwrap() - report["structured_sum_rhs"].as_f64().unwrap();
    assert!((gap - 0.4844).abs() <= 5e-4);
}

#[test]
fn rates_rejects_non_decomposable_joint_povm() {
    let mut spec: Value = serde_json::from_str(&std::fs::read_to_string(data("example1.json")).unwrap()).unwrap();
    // a joint POVM that is not the classical post-processing of the locals
    let identity4: Vec<Vec<[f64; 2]>> =
        (0..4).map(|r| (0..4).map(|c| [if r == c { 1.0 } else { 0.0 }, 0.0]).collect()).collect();
    let zero4: Vec<Vec<[f64; 2]>> = vec![vec![[0.0, 0.0]; 4]; 4];
    spec["m_ab"] = serde_json::json!({ "outcomes": ["0", "1"], "elements": [identity4, zero4] });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    let out = run(&["rates", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("residuals"));
}

#[test]
fn trivial_measurements_leave_only_field_terms() {
    let bell = serde_json::json!([
        [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        [[0.0, 0.0], [0.0, 0.0], [0.0, 0.0], [0.0, 0.0]],
        [[0.5, 0.0], [0.0, 0.0], [0.0, 0.0], [0.5, 0.0]]
    ]);
    let id2 = serde_json::json!([[[1.0, 0.0], [0.0, 0.0]], [[0.0, 0.0], [1.0, 0.0]]]);
    let spec = serde_json::json!({
        "rho_ab": bell,
        "m_a": { "elements": [id2] },
        "m_b": { "elements": [id2] },
        "p_zst": { "inputs": [1, 1], "outputs": 1, "rows": [[1.0]] },
        "p": 2,
        "f_s": [0],
        "f_t": [0],
        "p_zw": { "inputs": [2], "outputs": 1, "rows": [[1.0], [1.0]] }
    });
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("trivial.json");
    std::fs::write(&path, spec.to_string()).unwrap();
    let out = run(&["rates", path.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    for row in report["theorem1_region"]["inequalities"].as_array().unwrap() {
        assert!(row["const"].as_f64().unwrap() <= 1e-9, "{row}");
    }
}

#[test]
fn ucc_pairwise_check_passes() {
    let out = run(&["ucc", "--p", "2", "--n", "2", "--k", "1", "--l", "1", "--check-pairwise", "--witness"]);
    assert!(out.status.success());
    let report = json(&out);
    assert_eq!(report["pairwise"]["pass"], Value::Bool(true));
    assert_eq!(report["pairwise"]["max_pair_deviation"].as_f64(), Some(0.0));
    assert!(report["witness"].is_object());
}

#[test]
fn fm_eliminates_variable_from_region_file() {
    let dir = tempfile::tempdir().unwrap();
    let region = serde_json::json!({
        "variables": ["x", "y"],
        "inequalities": [
            { "coeffs": { "x": 1.0, "y": -1.0 }, "const": 0.0 },
            { "coeffs": { "y": 1.0 }, "const": 1.0 }
        ]
    });
    let path = dir.path().join("region.json");
    std::fs::write(&path, region.to_string()).unwrap();
    let out = run(&["fm", "--region", path.to_str().unwrap(), "--eliminate", "y"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json(&out);
    assert_eq!(report["variables"], serde_json::json!(["x"]));
    let rows = report["inequalities"].as_array().unwrap();
    assert_eq!(rows.len(), 1);
    assert_eq!(rows[0]["coeffs"]["x"].as_f64(), Some(1.0));
    assert_eq!(rows[0]["const"].as_f64(), Some(1.0));

    let r3 = run(&["fm", "--r3-from", &data("example1.json"), "--eliminate", "Rtilde"]);
    assert!(r3.status.success());
    assert!(!String::from_utf8_lossy(&r3.stdout).contains("Rtilde"));
}

#[test]
fn simulate_is_deterministic_under_seed() {
    let args = ["simulate", "--mode", "p2p", "--n", "3", "--l", "7", "--seed", "4"];
    let a = run(&args);
    let b = run(&args);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    let report = json(&a);
    assert!(report["subpovm_defect"].as_f64().unwrap() <= 1e-9);
    let other = run(&["simulate", "--mode", "p2p", "--n", "3", "--l", "7", "--seed", "5"]);
    assert_ne!(a.stdout, other.stdout);

    let dist = run(&["simulate", "--mode", "distributed", "--n", "2", "--l", "2", "--l2", "2"]);
    assert!(dist.status.success(), "{}", String::from_utf8_lossy(&dist.stderr));
    assert_eq!(json(&dist)["mode"], "distributed");
}

#[test]
fn lab_commands_pass() {
    let out = run(&["covering", "--trials", "400", "--seed", "3"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let out = run(&["pruning", "--trials", "500", "--seed", "3"]);
    assert!(out.status.success());
    assert_eq!(json(&out)["trace_violations"].as_u64(), Some(0));
}

#[test]
fn bad_arguments_exit_nonzero() {
    assert!(!run(&["example", "4"]).status.success());
    assert_eq!(run(&["rates", "/nonexistent/spec.json"]).status.code(), Some(2));
    assert_eq!(run(&["simulate", "--eta", "1.5"]).status.code(), Some(2));
}
