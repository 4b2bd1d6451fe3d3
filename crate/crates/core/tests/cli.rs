mod common;

use std::path::Path;
use std::process::{Command, Output};

use common::data;
use serde_json::Value;

fn kstab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kstab")).args(args).output().expect("binary runs")
}

fn json(out: &[u8]) -> Value {
    serde_json::from_slice(out).expect("report is JSON")
}

fn path(name: &str) -> String {
    data(name).display().to_string()
}

fn tmp(name: &str) -> std::path::PathBuf {
    let dir = std::env::temp_dir().join(format!("kstab-cli-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir.join(name)
}

#[test]
fn bs_solve_writes_profile_and_header() {
    let csv = tmp("bs.csv");
    let out = kstab(&["bs-solve", "--dim", "3", "--format", "csv", "--out", csv.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let table = std::fs::read_to_string(&csv).unwrap();
    assert!(table.starts_with("r,psi,dpsi,d2psi\n"));
    assert_eq!(table.lines().count(), 401);
    let header = json(&std::fs::read(csv.with_extension("json")).unwrap());
    let d0 = header["result"]["header"]["d0"].as_f64().unwrap();
    let target = -1.0 / (2.0 * std::f64::consts::PI.powi(2));
    assert!((d0 / target - 1.0).abs() < 0.01);
}

#[test]
fn balanced_demo_verdict_is_yes() {
    let out = kstab(&["verdict", "--model", &path("balanced_p1_cubed.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = json(&out.stdout);
    assert_eq!(r["result"]["verdict"], "yes");
    assert_eq!(r["pi_convention"]["state"], "calibrated");
    assert!(r["version"].is_string());
    assert!(r["tolerances"]["orbit_zero_residual"].is_number());
}

#[test]
fn unstable_demos_carry_certificates() {
    for (name, case) in
        [("unstable_p1_cubed.json", "negative_moment"), ("laplacian_destabilized.json", "negative_laplacian")]
    {
        let out = kstab(&["verdict", "--model", &path(name)]);
        assert_eq!(out.status.code(), Some(0));
        let r = json(&out.stdout);
        assert_eq!(r["result"]["verdict"], "no");
        let cert = &r["result"]["certificates"][0];
        assert_eq!(cert["case"], case);
        assert_eq!(cert["verified"], true);
    }
}

#[test]
fn inner_product_sweep_reports_slope() {
    let csv = tmp("sweep.csv");
    let out = kstab(&[
        "sweep",
        "--model",
        &path("p1xp2_torus.json"),
        "--gen",
        "0,2",
        "--format",
        "csv",
        "--out",
        csv.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let summary = json(&std::fs::read(csv.with_extension("json")).unwrap());
    assert_eq!(summary["result"]["quantity"], "inner_product");
    assert!(summary["result"]["fitted_slope"].as_f64().unwrap() >= 2.0 * 3.0 - 0.2);
    assert_eq!(std::fs::read_to_string(&csv).unwrap().lines().count(), 7);
}

#[test]
fn reports_are_byte_identical() {
    let args = ["alldelta", "--model", &path("unstable_p1_cubed.json"), "--seed", "11"];
    let a = kstab(&args);
    let b = kstab(&args);
    assert_eq!(a.stdout, b.stdout);
    let one = Command::new(env!("CARGO_BIN_EXE_kstab")).args(args).env("KSTAB_THREADS", "1").output().unwrap();
    assert_eq!(a.stdout, one.stdout);
}

#[test]
fn shipped_demos_validate_cleanly() {
    for entry in std::fs::read_dir(data("")).unwrap() {
        let p = entry.unwrap().path();
        let out = kstab(&["validate", "--model", p.to_str().unwrap()]);
        assert_eq!(out.status.code(), Some(0), "{}", p.display());
        assert_eq!(json(&out.stdout)["result"]["diagnostics"].as_array().unwrap().len(), 0);
    }
}

fn write_model(name: &str, text: &str) -> String {
    let p = tmp(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

#[test]
fn non_hermitian_generator_is_named() {
    let mut doc: Value = serde_json::from_str(&std::fs::read_to_string(data("p1xp2_torus.json")).unwrap()).unwrap();
    doc["generators"][2][1][0][1] = serde_json::json!([0.0, 0.5]);
    let p = write_model("bad.json", &doc.to_string());
    let out = kstab(&["validate", "--model", &p]);
    assert_eq!(out.status.code(), Some(1));
    let diags = json(&out.stdout)["result"]["diagnostics"].clone();
    let msg = diags[0]["message"].as_str().unwrap();
    assert_eq!(diags[0]["code"], "E_HERMITIAN");
    assert!(msg.contains("generator 2, factor 1"), "{msg}");
}

#[test]
fn every_failed_check_is_listed() {
    let doc = serde_json::json!({
        "factors": [{"dim": 2, "scale": 1.0}],
        "generators": [
            [[[[0, 0], [1, 0], [0, 0]], [[1, 0], [0, 0], [0, 0]], [[0, 0], [0, 0], [0, 0]]]],
            [[[[1, 0], [0, 0], [0, 0]], [[0, 0], [-1, 0], [0, 0]], [[0, 0], [0, 0], [0, 0]]]],
            [[[[0, 0], [0, -1], [0, 0]], [[0, 1], [0, 0], [0, 0]], [[0, 0], [0, 0], [0, 0]]]]
        ],
        "torus": [0, 1]
    });
    let p = write_model("nonabelian.json", &doc.to_string());
    let out = kstab(&["validate", "--model", &p]);
    let codes: Vec<String> = json(&out.stdout)["result"]["diagnostics"]
        .as_array()
        .unwrap()
        .iter()
        .map(|d| d["code"].as_str().unwrap().to_owned())
        .collect();
    assert!(codes.contains(&"E_DIMENSION".to_owned()));
    assert!(codes.contains(&"E_TORUS".to_owned()));
}

#[test]
fn two_dimensional_model_is_rejected_for_blowups() {
    let doc = serde_json::json!({
        "factors": [{"dim": 2, "scale": 1.0}],
        "generators": [[[[[1, 0], [0, 0], [0, 0]], [[0, 0], [-1, 0], [0, 0]], [[0, 0], [0, 0], [0, 0]]]]],
        "torus": [0],
        "point": [[[1, 0], [0, 0], [0, 0]]]
    });
    let p = write_model("p2.json", &doc.to_string());
    let out = kstab(&["futaki", "--model", &p, "--gen", "0"]);
    assert_eq!(out.status.code(), Some(1));
    let err = json(&out.stderr);
    assert_eq!(err["error"]["code"], "E_VALIDATION");
    assert!(err["error"]["message"].as_str().unwrap().contains("m > 2"));
    // stability commands still run
    assert_eq!(kstab(&["classify", "--model", &p]).status.code(), Some(0));
}

#[test]
fn errors_have_distinct_codes() {
    let missing = kstab(&["classify", "--model", "/nonexistent/model.json"]);
    assert_eq!(missing.status.code(), Some(1));
    assert_eq!(json(&missing.stderr)["error"]["code"], "E_IO");
    let p = write_model("broken.json", "{\"factors\": 3}");
    let schema = kstab(&["classify", "--model", &p]);
    assert_eq!(json(&schema.stderr)["error"]["code"], "E_SCHEMA");
    let bad_eps = kstab(&["futaki", "--model", &path("p3_torus.json"), "--gen", "0", "--eps", "2"]);
    assert_eq!(json(&bad_eps.stderr)["error"]["code"], "E_VALIDATION");
    assert!(Path::new(env!("CARGO_BIN_EXE_kstab")).exists());
}
