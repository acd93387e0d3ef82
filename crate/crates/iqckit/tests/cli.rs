//! End-to-end tests of the command-line interface: exit codes, report
//! round-trips and byte-level determinism.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_iqckit")
}

fn write(dir: &Path, name: &str, text: &str) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, text).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .output()
        .expect("binary runs")
}

fn tempdir(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("iqckit-cli-{tag}-{}", std::process::id()));
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

const LAG: &str = r#"{"domain":"ct","A":[[-1.0]],"B":[[1.0]],"C":[[1.0]],"D":[[0.0]]}"#;
const HALF_GAIN: &str = r#"{"domain":"ct","D":[[0.5]]}"#;
const SKEW: &str = r#"{"domain":"ct","D":[[0.0,1.0],[-1.0,0.0]]}"#;
const PASSIVITY: &str = r#"{"kind":"catalog","name":"passivity"}"#;

#[test]
fn hinf_reports_unit_norm() {
    let dir = tempdir("hinf");
    let lag = write(&dir, "lag.json", LAG);
    let out = run(&["hinf", "--system", lag.to_str().unwrap()]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let v: serde_json::Value = serde_json::from_str(&text).unwrap();
    let gamma = v["gamma"].as_f64().unwrap();
    assert!((gamma - 1.0).abs() <= 1e-5, "gamma {gamma}");
}

#[test]
fn destabilize_worked_example_and_verify() {
    let dir = tempdir("destab");
    let g1 = write(&dir, "g1.json", HALF_GAIN);
    let g2_path = dir.join("g2.json");
    let cert_path = dir.join("cert.json");
    let out = run(&[
        "destabilize",
        "--g1",
        g1.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
        "--profile",
        "t1",
        "--out",
        g2_path.to_str().unwrap(),
        "--cert",
        cert_path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cert: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&cert_path).unwrap()).unwrap();
    assert_eq!(cert["branch"], "CaseB_DeltaPath");
    assert!((cert["beta"].as_f64().unwrap() - 3.0).abs() <= 1e-9);
    let g2: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&g2_path).unwrap()).unwrap();
    assert!((g2["D"][0][0].as_f64().unwrap() - 2.0).abs() <= 1e-11);

    let out = run(&[
        "verify-cert",
        "--cert",
        cert_path.to_str().unwrap(),
        "--g1",
        g1.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("\"all_passed\": true"));
}

#[test]
fn skew_loop_exits_with_verdict_one() {
    let dir = tempdir("skew");
    let skew = write(&dir, "skew.json", SKEW);
    let out = run(&[
        "closed-loop",
        "--g1",
        skew.to_str().unwrap(),
        "--g2",
        skew.to_str().unwrap(),
        "--sign",
        "negative",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("not well-posed"));
}

#[test]
fn membership_exit_codes() {
    let dir = tempdir("membership");
    let g1 = write(&dir, "g1.json", HALF_GAIN);
    let neg = write(&dir, "neg.json", r#"{"domain":"ct","D":[[-0.5]]}"#);
    let out = run(&[
        "membership",
        "--system",
        g1.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
        "--set",
        "g1-nonstrict",
    ]);
    assert_eq!(out.status.code(), Some(1));
    let out = run(&[
        "membership",
        "--system",
        neg.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
        "--set",
        "g1-nonstrict",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn parse_errors_exit_two() {
    let dir = tempdir("badjson");
    let bad = write(&dir, "bad.json", "{broken");
    let out = run(&["hinf", "--system", bad.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn emitted_systems_reload_identically() {
    let dir = tempdir("roundtrip");
    let g1 = write(&dir, "g1.json", HALF_GAIN);
    let g2_path = dir.join("g2.json");
    let cert_path = dir.join("cert.json");
    let out = run(&[
        "destabilize",
        "--g1",
        g1.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
        "--profile",
        "t3",
        "--out",
        g2_path.to_str().unwrap(),
        "--cert",
        cert_path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    // reload and compare grid responses exactly
    let text = std::fs::read_to_string(&g2_path).unwrap();
    let sys = iqckit::io::system_from_json(&text).unwrap();
    let re_emitted = iqckit::io::system_to_json(&sys);
    assert_eq!(text, re_emitted);
    let grid = iqckit::grid::FrequencyGrid::default_with_points(iqckit::lti::Domain::Ct, 50);
    let reloaded = iqckit::io::system_from_json(&re_emitted).unwrap();
    for w in grid.points() {
        let a = sys.evaluate_boundary(*w).unwrap();
        let b = reloaded.evaluate_boundary(*w).unwrap();
        assert!(iqckit::lti::sigma_max(&(a - b)) <= 1e-12);
    }
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let dir = tempdir("determinism");
    let g1 = write(&dir, "g1.json", HALF_GAIN);
    let args = [
        "destabilize",
        "--g1",
        g1.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
        "--profile",
        "t1",
    ];
    let first = run(&args);
    let second = run(&args);
    assert!(first.status.success());
    assert_eq!(first.stdout, second.stdout);

    let lag = write(&dir, "lag.json", LAG);
    let args = ["passivity", "--system", lag.to_str().unwrap()];
    let first = run(&args);
    let second = run(&args);
    assert_eq!(first.stdout, second.stdout);
}

#[test]
fn freqresp_csv_shape_and_grid_env() {
    let dir = tempdir("freqresp");
    let lag = write(&dir, "lag.json", LAG);
    let out = Command::new(bin())
        .args(["freqresp", "--system", lag.to_str().unwrap()])
        .env("IQC_GRID_POINTS", "37")
        .output()
        .unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "omega,g_11_re,g_11_im");
    // 37 interior + {0, inf}
    assert_eq!(lines.len(), 1 + 39);
    assert!(lines.last().unwrap().starts_with("inf,"));
}

#[test]
fn sweep_rho_table_monotone() {
    let dir = tempdir("sweep");
    let g1 = write(&dir, "g1.json", HALF_GAIN);
    let out = run(&[
        "sweep-rho",
        "--g1",
        g1.to_str().unwrap(),
        "--multiplier",
        PASSIVITY,
        "--rho",
        "0.5",
        "--rho",
        "0.9",
        "--rho",
        "0.99",
    ]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    let rows = v["rows"].as_array().unwrap();
    let gains: Vec<f64> = rows.iter().map(|r| r["gain"].as_f64().unwrap()).collect();
    assert!(gains.windows(2).all(|w| w[1] > w[0]));
    assert!((gains[0] - 14.0 / 3.0).abs() <= 1e-9);
}

#[test]
fn check_conditions_and_factorize() {
    let out = run(&[
        "check-conditions",
        "--multiplier",
        PASSIVITY,
        "--profile",
        "t1",
        "--n",
        "2",
        "--m",
        "2",
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout)
        .unwrap()
        .contains("\"all_passed\": true"));

    let out = run(&[
        "factorize",
        "--multiplier",
        r#"{"kind":"constant","pi":[[0.0,1.0],[1.0,0.0]],"n":1,"m":1}"#,
    ]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("reconstruction_residual"));

    // rotated passivity factors are display-only complex constants
    let out = run(&[
        "factorize",
        "--multiplier",
        r#"{"kind":"catalog","name":"fw_passivity","theta":0.5}"#,
    ]);
    assert!(out.status.success());
    assert!(String::from_utf8(out.stdout).unwrap().contains("display only"));
}

#[test]
fn fw_checks_exit_codes() {
    let dir = tempdir("fw");
    let half = write(&dir, "half.json", HALF_GAIN);
    let two = write(&dir, "two.json", r#"{"domain":"ct","D":[[2.0]]}"#);
    let one = write(&dir, "one.json", r#"{"domain":"ct","D":[[1.0]]}"#);
    let lagw = write(&dir, "lagw.json", LAG);

    let out = run(&[
        "fw-smallgain",
        "--g1",
        half.to_str().unwrap(),
        "--weight",
        one.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    let out = run(&[
        "fw-smallgain",
        "--g1",
        two.to_str().unwrap(),
        "--weight",
        lagw.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(1));

    let out = run(&[
        "fw-passivity",
        "--system",
        one.to_str().unwrap(),
        "--theta",
        "0.785",
        "--side",
        "uncertainty",
    ]);
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn info_prints_poles() {
    let dir = tempdir("info");
    let lag = write(&dir, "lag.json", LAG);
    let out = run(&["info", "--system", lag.to_str().unwrap()]);
    assert!(out.status.success());
    let v: serde_json::Value =
        serde_json::from_str(&String::from_utf8(out.stdout).unwrap()).unwrap();
    assert_eq!(v["order"], 1);
    assert_eq!(v["stable"], true);
    assert!((v["poles"][0]["re"].as_f64().unwrap() + 1.0).abs() <= 1e-12);
}

#[test]
fn prop_table_small_run() {
    let out = run(&["prop-table", "--samples", "6"]);
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stdout)
    );
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("Robust uniform stability"));
}
