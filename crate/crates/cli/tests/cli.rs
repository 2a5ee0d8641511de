use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("tests/fixtures")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qinstrument"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn report(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).expect("stdout is a JSON report")
}

fn check_named<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"] == name)
        .unwrap_or_else(|| panic!("no check named {name}"))
}

#[test]
fn check_accepts_luders_instrument() {
    let out = run(&["check", &fixture("luders_z.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["command"], "check");
    assert_eq!(r["pass"], true);
    assert_eq!(r["payload"]["kind"], "instrument");
    assert_eq!(r["payload"]["completely_positive"], true);
    assert_eq!(r["payload"]["sharp"]["nondegenerate"], true);
    assert!(!out.stderr.is_empty());
}

#[test]
fn check_reports_scaled_kraus_normalization() {
    let out = run(&["check", &fixture("perturbed_z.json")]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert_eq!(r["pass"], false);
    // Σ (1.1)² P = 1.21·I, so T*(I) misses I by 0.21 in each diagonal entry.
    let dev = check_named(&r, "normalization")["max_deviation"].as_f64().unwrap();
    assert!((dev - 0.21).abs() < 1e-12, "{dev}");
}

#[test]
fn malformed_json_is_an_input_failure() {
    for cmd in ["check", "povm", "dilate"] {
        let out = run(&[cmd, &fixture("malformed.json")]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        assert!(out.stdout.is_empty());
    }
}

#[test]
fn missing_file_is_an_input_failure() {
    let out = run(&["check", "/definitely/not/here.json"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_knows_every_file_kind() {
    let out = run(&["check", &fixture("ket0.json")]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["payload"]["kind"], "state");

    let out = run(&["check", &fixture("observable_z.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["payload"]["kind"], "observable");
    assert_eq!(r["payload"]["ranks"], serde_json::json!([1, 1]));
}

#[test]
fn transpose_instrument_is_valid_but_not_cp() {
    let out = run(&["check", &fixture("transpose_trivial.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["payload"]["completely_positive"], false);
    // The Choi matrix of the 2x2 transpose is the swap, with eigenvalue -1.
    let min = r["payload"]["min_choi_eigenvalue"].as_f64().unwrap();
    assert!((min + 1.0).abs() < 1e-12);
}

#[test]
fn povm_extraction_writes_a_checkable_file() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("povm.json");
    let out = run(&["povm", &fixture("luders_x.json"), "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let povm: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(povm["outcomes"], serde_json::json!(["+", "-"]));
    // |+⟩⟨+| has every entry 1/2.
    for entry in povm["effects"]["+"]["data"].as_array().unwrap() {
        assert!((entry[0].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
    let out = run(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert_eq!(r["payload"]["kind"], "povm");
    assert_eq!(r["payload"]["projective"], true);
}

#[test]
fn dilation_writes_a_model_that_checks() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("model.json");
    let out = run(&["dilate", &fixture("luders_z.json"), "-o", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    assert!(r["payload"]["roundtrip_deviation"].as_f64().unwrap() < 1e-8);
    assert!(check_named(&r, "coupling_unitary")["max_deviation"].as_f64().unwrap() < 1e-10);

    let out = run(&["check", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["payload"]["kind"], "model");
}

#[test]
fn dilation_rejects_non_cp_with_witness() {
    let out = run(&["dilate", &fixture("transpose_trivial.json")]);
    assert_eq!(out.status.code(), Some(1));
    let r = report(&out);
    assert!((r["payload"]["min_choi_eigenvalue"].as_f64().unwrap() + 1.0).abs() < 1e-12);
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert!(stderr.contains("eigenvalue -1.0"), "{stderr}");
}

#[test]
fn dilation_to_unwritable_path_is_an_io_failure() {
    let dir = tempfile::tempdir().unwrap();
    let bad: PathBuf = dir.path().join("missing").join("model.json");
    let out = run(&["dilate", &fixture("luders_z.json"), "-o", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn simulation_stays_within_four_sigma() {
    let out = run(&[
        "simulate",
        &fixture("luders_z.json"),
        &fixture("luders_x.json"),
        "--state",
        &fixture("ket0.json"),
        "--shots",
        "100000",
        "--seed",
        "7",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let tuples = r["payload"]["tuples"].as_array().unwrap();
    assert_eq!(tuples.len(), 4);
    let total: u64 = tuples.iter().map(|t| t["count"].as_u64().unwrap()).sum();
    assert_eq!(total, 100_000);
    for t in tuples {
        assert!(t["z"].as_f64().unwrap().abs() <= 4.0, "{t}");
    }
    assert_eq!(tuples[0]["outcome"], serde_json::json!(["0", "+"]));
    assert!((tuples[0]["exact"].as_f64().unwrap() - 0.5).abs() < 1e-12);
}

#[test]
fn zero_shots_is_rejected() {
    let out = run(&[
        "simulate",
        &fixture("luders_z.json"),
        "--state",
        &fixture("ket0.json"),
        "--shots",
        "0",
    ]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn single_apparatus_joint_is_born_rule() {
    let out = run(&["joint", &fixture("luders_x.json"), "--state", &fixture("ket0.json")]);
    assert_eq!(out.status.code(), Some(0));
    let r = report(&out);
    let rows = r["payload"]["joint"].as_array().unwrap();
    // ⟨0|±⟩⟨±|0⟩ = 1/2.
    for row in rows {
        assert!((row["probability"].as_f64().unwrap() - 0.5).abs() < 1e-12);
    }
}

#[test]
fn dimension_mismatch_is_semantic() {
    let dir = tempfile::tempdir().unwrap();
    let state = dir.path().join("qutrit.json");
    let third = [1.0 / 3.0, 0.0];
    let zero = [0.0, 0.0];
    let data: Vec<[f64; 2]> = (0..9).map(|k| if k % 4 == 0 { third } else { zero }).collect();
    std::fs::write(&state, serde_json::json!({"rows": 3, "cols": 3, "data": data}).to_string()).unwrap();
    let out = run(&["joint", &fixture("luders_z.json"), "--state", state.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn mlpd_reports_affine_and_rejects_zero_trials() {
    let out = run(&["mlpd", &fixture("luders_z.json"), &fixture("luders_x.json"), "--trials", "30"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(report(&out)["payload"]["result"]["verdict"], "affine");

    let out = run(&["mlpd", &fixture("luders_z.json"), "--trials", "0"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let args = [
        "simulate",
        &fixture("luders_z.json"),
        &fixture("luders_x.json"),
        "--state",
        &fixture("ket0.json"),
        "--shots",
        "5000",
        "--seed",
        "11",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.stdout, b.stdout);
    let other = run(&[&args[..8], &["12"]].concat());
    assert_ne!(a.stdout, other.stdout);
}
