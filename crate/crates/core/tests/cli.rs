use std::fs;
use std::process::{Command, Output};

use serde_json::Value;

fn vsm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_vsm"))
        .args(args)
        .output()
        .unwrap()
}

fn stdout_json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap()
}

#[test]
fn meter_theta_zero_is_ghz_product() {
    let out = vsm(&["meter", "--K", "2", "--N", "3", "--theta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let re: Vec<f64> = serde_json::from_value(v["state"]["re"].clone()).unwrap();
    for (i, a) in re.iter().enumerate() {
        let expected = if [0, 7, 56, 63].contains(&i) {
            0.5
        } else {
            0.0
        };
        assert!((a - expected).abs() < 1e-15);
    }
    assert_eq!(v["metadata"]["version"], env!("CARGO_PKG_VERSION"));
}

#[test]
fn povm_strong_limit_gives_projectors() {
    let out = vsm(&["povm", "--obs", "ZZ", "--theta", "0"]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    let diag = |s: &str| -> Vec<f64> {
        (0..4)
            .map(|i| v["effects"][s]["re"][i][i].as_f64().unwrap())
            .collect()
    };
    for (s, expected) in [("+", [1.0, 0.0, 0.0, 1.0]), ("-", [0.0, 1.0, 1.0, 0.0])] {
        for (a, b) in diag(s).iter().zip(expected) {
            assert!((a - b).abs() < 1e-15);
        }
    }
}

#[test]
fn qudit_strength_two_thirds() {
    let out = vsm(&["qudit", "--d", "4", "--theta", "0.5236"]);
    assert_eq!(out.status.code(), Some(0));
    let s = stdout_json(&out)["strength"].as_f64().unwrap();
    assert!((s - 2.0 / 3.0).abs() < 1e-4);
    let exact = vsm(&["qudit", "--d", "4", "--theta", "30deg"]);
    let s = stdout_json(&exact)["strength"].as_f64().unwrap();
    assert!((s - 2.0 / 3.0).abs() < 1e-15);
}

#[test]
fn sweep_csv_rows_and_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("sweep.csv");
    let out = vsm(&[
        "sweep",
        "--K",
        "2",
        "--N",
        "2",
        "--grid",
        "0:90deg:25",
        "--format",
        "csv",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .starts_with("sweep K=2 N=2"));
    let text = fs::read_to_string(&path).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "theta,strength,tau,residual,vsm_compliant");
    assert_eq!(rows.len(), 26);
    for row in &rows[1..] {
        let residual: f64 = row.split(',').nth(3).unwrap().parse().unwrap();
        assert!(residual < 1e-8);
    }
    assert!(text.contains("# seed=none"));

    let failing = vsm(&["sweep", "--K", "2", "--N", "3", "--grid", "0:1:2"]);
    assert_eq!(failing.status.code(), Some(2));
}

#[test]
fn validation_errors_exit_one_and_name_the_flag() {
    let out = vsm(&["povm", "--obs", "XX,ZX", "--theta", "0.2"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--obs"));

    let out = vsm(&["meter", "--K", "2", "--N", "2", "--theta", "abc"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--theta"));

    let out = vsm(&["sample", "--obs", "ZZ", "--theta", "0.1", "--state", "00"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--seed"));

    let out = vsm(&["sweep", "--K", "1", "--N", "2", "--grid", "0:1:1"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--grid"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let mut bodies = Vec::new();
    for name in ["a.json", "b.json"] {
        let path = dir.path().join(name);
        let out = vsm(&[
            "sample",
            "--obs",
            "XX,ZZ",
            "--theta",
            "0.4",
            "--state",
            "bell:psi-",
            "--samples",
            "200",
            "--seed",
            "77",
            "--records",
            "--out",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.status.code(), Some(0));
        bodies.push(fs::read(&path).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
    let v: Value = serde_json::from_slice(&bodies[0]).unwrap();
    assert_eq!(v["metadata"]["seed"], 77);
    assert_eq!(v["records"].as_array().unwrap().len(), 200);
}

#[test]
fn model_json_and_distribution_csv() {
    let dir = tempfile::tempdir().unwrap();
    let model = dir.path().join("model.json");
    fs::write(
        &model,
        r#"{"observables": ["XX","ZZ"], "theta": 0.5235987755982988, "order": [2,1]}"#,
    )
    .unwrap();
    let out = vsm(&[
        "distribution",
        "--model",
        model.to_str().unwrap(),
        "--state",
        "bell:phi+",
        "--format",
        "csv",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows[0], "signs,probability");
    let p: f64 = rows[1].strip_prefix("++,").unwrap().parse().unwrap();
    assert!((p - 0.75).abs() < 1e-12);
}

#[test]
fn bell_demo_reports_and_passes() {
    let out = vsm(&[
        "bell-demo",
        "--theta",
        "0",
        "--samples",
        "2000",
        "--seed",
        "3",
    ]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert_eq!(v["passed"], true);
    assert_eq!(v["inputs"].as_array().unwrap().len(), 4);
}

#[test]
fn tangle_of_input_state() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("ghz.json");
    let h = std::f64::consts::FRAC_1_SQRT_2;
    fs::write(
        &path,
        format!(r#"{{"n": 3, "re": [{h},0,0,0,0,0,0,{h}], "im": [0,0,0,0,0,0,0,0]}}"#),
    )
    .unwrap();
    let out = vsm(&["tangle", "--state", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let v = stdout_json(&out);
    assert!((v["tau"].as_f64().unwrap() - 1.0).abs() < 1e-12);
    assert_eq!(v["method"], "contraction");
    assert!(v["residual"].is_null());
}
