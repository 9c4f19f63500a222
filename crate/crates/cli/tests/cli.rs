use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_tunnelkit");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const SQUARE_SCAN: &str = r#"{
  "potential": {"family": "square_barrier", "params": {"V0": 1.0, "width": 2.0}, "domain": [-5.0, 5.0]},
  "sweep": {"parameter": "E", "start": 0.1, "stop": 0.9, "count": 9},
  "constants": {"m0": 1.0, "hbar": 1.0, "grid_n": 64}
}"#;

fn rectangular(e: f64) -> f64 {
    let kappa = (2.0 * (1.0 - e)).sqrt();
    let s = (2.0 * kappa).sinh();
    1.0 / (1.0 + s * s / (4.0 * e * (1.0 - e)))
}

#[test]
fn transmission_scan_matches_closed_form_row_by_row() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SQUARE_SCAN);
    let out = dir.path().join("scan.csv");
    let status = run(&["transmission-scan", "--config", &cfg, "--output", out.to_str().unwrap()]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let text = fs::read_to_string(out).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "E,T_exact,R,T_wkb,S,2S_over_hbar,richardson_defect");
    let rows: Vec<Vec<f64>> = lines
        .map(|l| l.split(',').map(|c| c.parse().unwrap()).collect())
        .collect();
    assert_eq!(rows.len(), 9);
    for row in rows {
        let expected = rectangular(row[0]);
        assert!(((row[1] - expected) / expected).abs() < 1e-10, "{row:?}");
        assert!((row[1] + row[2] - 1.0).abs() < 1e-10);
    }
}

#[test]
fn period_json_reports_pi() {
    let out = run(&[
        "period",
        "--set",
        "potential.family=harmonic_well",
        "--set",
        r#"potential.params={"k": 1.0}"#,
        "--set",
        "potential.domain=[-5, 5]",
        "--set",
        "constants.E=0.5",
        "--format",
        "json",
    ]);
    assert!(out.status.success());
    let doc: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(doc["schema"], 1);
    let value = doc["points"][0]["result"]["value"].as_f64().unwrap();
    assert!((value - std::f64::consts::PI).abs() < 1e-10);
}

#[test]
fn invalid_family_is_a_usage_error_without_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        r#"{"potential": {"family": "triangle", "params": {}, "domain": [-1, 1]}, "constants": {"E": 0.5}}"#,
    );
    let target = dir.path().join("out.csv");
    let out = run(&["period", "--config", &cfg, "--output", target.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(!target.exists());
}

#[test]
fn computation_errors_exit_one_with_name() {
    let out = run(&["mass-transform", "--set", "constants.v=1.5"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("domain"));
    let out = run(&[
        "wkb-profile",
        "--set",
        "potential.family=harmonic_well",
        "--set",
        r#"potential.params={"k": 1.0}"#,
        "--set",
        "potential.domain=[-5, 5]",
        "--set",
        "constants.E=0.5",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no-bounded-region"));
}

#[test]
fn bad_sweeps_and_flags_are_usage_errors() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SQUARE_SCAN);
    for args in [
        vec!["transmission-scan", "--config", &cfg, "--set", "sweep.stop=0.05"],
        vec!["transmission-scan", "--config", &cfg, "--set", "sweep.count=0"],
        vec!["transmission-scan", "--config", &cfg, "--jobs", "0"],
        vec!["transmission-scan", "--config", &cfg, "--format", "xml"],
        vec!["period", "--config", &cfg, "--set", "quantity=trajectory"],
    ] {
        assert_eq!(run(&args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn output_is_deterministic_and_independent_of_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), SQUARE_SCAN);
    let serial = run(&["transmission-scan", "--config", &cfg, "--set", "sweep.count=40", "--jobs", "1"]);
    let again = run(&["transmission-scan", "--config", &cfg, "--set", "sweep.count=40", "--jobs", "1"]);
    let parallel = run(&["transmission-scan", "--config", &cfg, "--set", "sweep.count=40", "--jobs", "8"]);
    assert!(serial.status.success());
    assert_eq!(serial.stdout, again.stdout);
    assert_eq!(serial.stdout, parallel.stdout);
}

#[test]
fn hbar_log_sweep_prepends_the_swept_column() {
    let out = run(&[
        "transmission-scan",
        "--set",
        "potential.family=gaussian_barrier",
        "--set",
        r#"potential.params={"height": 1.0, "sigma": 1.0}"#,
        "--set",
        "potential.domain=[-10, 10]",
        "--set",
        "constants.E=0.5",
        "--set",
        r#"sweep={"parameter": "hbar", "start": 0.25, "stop": 1.0, "count": 3, "spacing": "log"}"#,
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("hbar,E,T_exact"));
    assert_eq!(lines.len(), 4);
    assert!(lines[2].starts_with("0.5,"));
}

#[test]
fn trajectory_csv_header_and_start() {
    let out = run(&[
        "trajectory",
        "--set",
        "potential.family=parabolic_barrier",
        "--set",
        r#"potential.params={"V0": 1.0, "k": 1.0}"#,
        "--set",
        "potential.domain=[-5, 5]",
        "--set",
        "constants.E=0.5",
        "--set",
        "options.region=H",
        "--set",
        "constants.dt=0.01",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "t,x,v,energy_defect");
    let first: Vec<f64> = lines.next().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(first[0], 0.0);
    assert!((first[1] + 1.0).abs() < 1e-12);
    // stops at the far turning point after about half a period
    let last: Vec<f64> = lines.last().unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert!((last[0] - std::f64::consts::PI).abs() < 0.02, "{last:?}");
}

#[test]
fn operator_check_and_turning_points_emit_tables() {
    let out = run(&["operator-check", "--set", "constants.doublings=1", "--set", "options.rep=corpuscular"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 2);
    let out = run(&[
        "turning-points",
        "--set",
        "potential.family=harmonic_well",
        "--set",
        r#"potential.params={"k": 1.0}"#,
        "--set",
        "potential.domain=[-5, 5]",
        "--set",
        "constants.E=0.5",
    ]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text, "E,x,kind\n0.5,-1.0,simple\n0.5,1.0,simple\n");
}
