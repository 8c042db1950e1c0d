use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

use cascade_cli::shipped_config;

fn cascade(args: &[&str], config: &Path, out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cascade"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .output()
        .unwrap()
}

fn read(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn write(dir: &Path, name: &str, value: &Value) -> std::path::PathBuf {
    let path = dir.join(name);
    fs::write(&path, value.to_string()).unwrap();
    path
}

#[test]
fn zero_data_gives_zero_ledger() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "zero.json",
        &json!({
            "system": {"n": 2, "length": "pi", "modes": 6, "subdiagonal": [
                {"row": 2, "coefficient": {"kind": "expr", "name": "constant", "params": {"value": 1.0}}, "region": [0.0, 3.0]}
            ]},
            "initial": {"kind": "zero"},
            "horizon": 1.0,
            "dt": 0.01
        }),
    );
    let out = dir.path().join("out");
    let res = cascade(&["simulate"], &cfg, &out);
    assert_eq!(res.status.code(), Some(0));
    let text = fs::read_to_string(out.join("ledger.csv")).unwrap();
    let mut rows = text.lines();
    assert_eq!(rows.next(), Some("t,e0_u1,e1_u2"));
    for row in rows {
        assert!(row.split(',').skip(1).all(|v| v.parse::<f64>().unwrap() == 0.0));
    }
}

#[test]
fn malformed_json_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{ \"system\": ").unwrap();
    let res = cascade(&["simulate"], &cfg, &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
    assert!(!res.stderr.is_empty());
}

#[test]
fn unknown_field_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read(&shipped_config("free_mode.json"));
    cfg["horizen"] = json!(1.0);
    let path = write(dir.path(), "typo.json", &cfg);
    assert_eq!(cascade(&["simulate"], &path, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn hypothesis_violation_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read(&shipped_config("hum_interior.json"));
    cfg["controls"][0]["component"] = json!(1);
    let path = write(dir.path(), "wrong_target.json", &cfg);
    assert_eq!(cascade(&["hum"], &path, &dir.path().join("out")).status.code(), Some(2));
}

#[test]
fn zero_threads_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let res = cascade(&["simulate", "--threads", "0"], &shipped_config("free_mode.json"), &dir.path().join("out"));
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn hum_reports_success_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = cascade(&["hum", "--modes", "8", "--seed", "4"], &shipped_config("hum_interior.json"), &out);
    assert_eq!(res.status.code(), Some(0));
    let sol = read(&out.join("solution.json"));
    assert_eq!(sol["success"], true);
    assert_eq!(sol["dimension"], 32);
    assert!(out.join("control_1.csv").exists());
    let manifest = read(&out.join("manifest.json"));
    assert_eq!(manifest["command"], "hum");
    assert_eq!(manifest["seed"], 4);
    assert_eq!(manifest["overrides"]["modes"], 8);
    assert_eq!(manifest["status"], "ok");
    let listed: Vec<&str> = manifest["outputs"].as_array().unwrap().iter().map(|o| o["file"].as_str().unwrap()).collect();
    assert_eq!(listed, ["solution.json", "control_1.csv", "ledger.csv"]);
}

#[test]
fn singular_gramian_exits_3_with_report() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = cascade(&["gramian"], &shipped_config("gramian_decoupled.json"), &out);
    assert_eq!(res.status.code(), Some(3));
    assert_eq!(read(&out.join("spectrum.json"))["positive_definite"], false);
    assert_eq!(read(&out.join("manifest.json"))["status"], "numerical-failure");
}

#[test]
fn uncontrollable_simultaneous_exits_3_with_failure_report() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = read(&shipped_config("simultaneous.json"));
    cfg["system"]["alpha"] = json!({"kind": "expr", "name": "constant", "params": {"value": 0.0}});
    cfg["system"]["modes"] = json!(6);
    let path = write(dir.path(), "no_alpha.json", &cfg);
    let out = dir.path().join("out");
    assert_eq!(cascade(&["simultaneous"], &path, &out).status.code(), Some(3));
    assert!(read(&out.join("failure.json"))["error"].is_string());
}

#[test]
fn dt_override_changes_grid() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = cascade(&["simulate", "--dt", "0.01"], &shipped_config("conservation.json"), &out);
    assert_eq!(res.status.code(), Some(0));
    assert_eq!(read(&out.join("summary.json"))["steps"], 2000);
}

#[test]
fn seed_override_changes_random_data() {
    let dir = tempfile::tempdir().unwrap();
    let energy = |seed: &str| {
        let out = dir.path().join(format!("s{seed}"));
        assert_eq!(cascade(&["observe", "--seed", seed], &shipped_config("ratio_decoupled.json"), &out).status.code(), Some(0));
        read(&out.join("summary.json"))["initial_energy"].clone()
    };
    assert_ne!(energy("1"), energy("2"));
    assert_eq!(energy("1"), energy("1"));
}
