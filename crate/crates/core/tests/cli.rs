use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optomech-sta"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, json: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, json).unwrap();
    path.to_str().unwrap().to_owned()
}

#[test]
fn transfer_writes_drives_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["transfer", "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));

    let drives = fs::read_to_string(dir.path().join("drives.csv")).unwrap();
    let mut lines = drives.lines();
    assert_eq!(lines.next().unwrap(), "t,omega_L,omega_R,omega_M,gA_L,gA_R");
    assert_eq!(lines.count(), 2001);

    let traj = fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    let last: Vec<f64> = traj
        .lines()
        .last()
        .unwrap()
        .split(',')
        .map(|x| x.parse().unwrap())
        .collect();
    assert!(last[5] >= 0.99 && last[4] <= 0.01);

    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("run_meta.json")).unwrap())
            .unwrap();
    assert_eq!(meta["config"]["integrator"]["steps"], 4000);
}

#[test]
fn sweep_from_config_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        r#"{
            "units": {"rate": "g", "time": "1/g"},
            "mode": "sweep_fidelity",
            "grid": {"tValues": [0.35, 1.0], "phi0Values": [0.1, 0.15]}
        }"#,
    );
    let out = dir.path().join("out");
    let o = cli(&[
        "sweep-fidelity",
        "--config",
        &config,
        "--out",
        out.to_str().unwrap(),
        "--steps",
        "2000",
        "--workers",
        "2",
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let rows: Vec<&str> = csv.lines().collect();
    assert_eq!(rows[0], "T,phi0,value");
    assert_eq!(rows.len(), 5);
    assert!(rows[1].starts_with("0.35,0.1,"));
    let meta: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run_meta.json")).unwrap()).unwrap();
    assert_eq!(meta["config"]["integrator"]["steps"], 2000);
    assert_eq!(meta["config"]["workers"], 2);
}

#[test]
fn config_for_other_mode_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), r#"{"mode": "transfer"}"#);
    let o = cli(&[
        "sweep-kmin",
        "--config",
        &config,
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
}

#[test]
fn invalid_inputs_fail_with_message() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["transfer", "--out", out, "--steps", "10"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("steps"));

    let o = cli(&["transfer", "--config", "/nonexistent/config.json"]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("/nonexistent/config.json"));

    let config = write_config(
        dir.path(),
        r#"{"mode": "transfer", "pulse": {"totalTime": 1.0, "tau": 0.1, "tauC": 0.3, "phi0": 0.0}}"#,
    );
    let o = cli(&["transfer", "--config", &config, "--out", out]);
    assert!(!o.status.success());
}

#[test]
fn validate_reports_and_flags_rwa() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = cli(&["validate", "--out", out]);
    assert!(!o.status.success());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(stdout.contains("rwa") && stdout.contains("FAIL"));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("validation.json")).unwrap())
            .unwrap();
    assert_eq!(report["invariantPass"], true);
    assert_eq!(report["rwa"]["pass"], false);

    let config = write_config(
        dir.path(),
        r#"{"mode": "validate", "rwaThreshold": 5.0, "boundaryTolerance": 0.25}"#,
    );
    let o = cli(&["validate", "--config", &config, "--out", out]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
}
