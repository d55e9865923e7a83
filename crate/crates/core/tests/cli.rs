use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use optomech::experiments::{read_sweep_csv, read_trajectory_csv, SWEEP_HEADER, TRAJECTORY_HEADER};
use optomech::liouvillian::{DissipationMode, VariantId};
use serde_json::Value;
use tempfile::TempDir;

const SMALL: &str = r#"{
  "params": {"delta": 0.0, "g0": 0.8, "kappa": 0.05, "gamma_m": 0.016666666666666666},
  "reservoir": {"n_th": 1.0, "r": 0.0, "theta": 0.0},
  "variant": "DSME_THERMAL",
  "space": {"dim_cavity": 4, "dim_mech": 4},
  "t_max_kappa": 1.5,
  "samples": 60
}"#;

fn optomech(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_optomech"))
        .args(args)
        .env("RUST_LOG", "error")
        .output()
        .expect("binary runs")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("config.json");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn run_writes_trajectory_and_manifest() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let res = optomech(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let csv = out.join("DSME_THERMAL.csv");
    let text = fs::read_to_string(&csv).unwrap();
    assert!(!text.contains('\r'));
    assert_eq!(text.lines().next(), Some(TRAJECTORY_HEADER));
    let rows = read_trajectory_csv(&csv).unwrap();
    assert_eq!(rows.len(), 60);
    assert_eq!(rows[0].kappa_t, 0.0);
    assert!((rows[0].p_pq - 0.5).abs() < 1e-12);
    assert!(rows.windows(2).all(|w| w[1].kappa_t > w[0].kappa_t));
    assert!(rows.last().unwrap().p_pq < rows[0].p_pq);
    let mantissa = text.lines().nth(1).unwrap().split(',').nth(1).unwrap();
    let digits: String = mantissa.split('e').next().unwrap().chars().filter(|c| c.is_ascii_digit()).collect();
    assert_eq!(digits.len(), 12);

    let manifest = read_json(&out.join("DSME_THERMAL.json"));
    assert_eq!(manifest["kind"], "run");
    assert_eq!(manifest["truncations"]["hilbert_dim"], 16);
    assert_eq!(manifest["config"]["variant"], "DSME_THERMAL");
    assert_eq!(manifest["tolerances"]["rtol"], 1e-8);
    assert!(manifest["diagnostics"]["max_trace_err"].as_f64().unwrap() < 1e-10);
    assert!(manifest["wall_time_s"].as_f64().unwrap() >= 0.0);
    assert!(manifest["coherence_time_kappa_t"].as_f64().is_some());
}

#[test]
fn overrides_select_variant_and_mode() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let res = optomech(&[
        "run",
        "--config",
        &config,
        "--variant",
        "sme_dressed_thermal",
        "--mode",
        "literal",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let manifest = read_json(&out.join("SME_DRESSED_THERMAL.json"));
    assert_eq!(manifest["config"]["variant"], "SME_DRESSED_THERMAL");
    assert_eq!(manifest["config"]["mode"], "PAPER_LITERAL");
}

#[test]
fn unknown_config_key_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), &SMALL.replace("\"samples\"", "\"sample_count\""));
    let res = optomech(&["run", "--config", &config, "--out", tmp.path().join("out").to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("sample_count"));
}

#[test]
fn unknown_variant_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let res = optomech(&[
        "run",
        "--config",
        &config,
        "--variant",
        "DSME_WARM",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
}

#[test]
fn failed_run_leaves_failure_manifest() {
    let tmp = TempDir::new().unwrap();
    let text = SMALL.replace("\"samples\": 60", "\"samples\": 60, \"integrator\": {\"method\": \"exact_expm\"}");
    let text = text.replace("\"dim_mech\": 4", "\"dim_mech\": 10");
    let config = write_config(tmp.path(), &text);
    let out = tmp.path().join("out");
    let res = optomech(&["run", "--config", &config, "--out", out.to_str().unwrap()]);
    assert!(!res.status.success());
    let manifest = read_json(&out.join("DSME_THERMAL.json"));
    assert!(manifest["error"].as_str().unwrap().contains("32"));
    assert!(!out.join("DSME_THERMAL.csv").exists());
}

#[test]
fn theta_sweep_of_thermal_variant_is_flat() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let out = tmp.path().join("out");
    let res = optomech(&[
        "sweep",
        "--config",
        &config,
        "--axis",
        "theta",
        "--values",
        "0,1.5,3.0",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = out.join("sweep_theta.csv");
    assert_eq!(fs::read_to_string(&csv).unwrap().lines().next(), Some(SWEEP_HEADER));
    let rows = read_sweep_csv(&csv).unwrap();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| r.axis == "theta"
        && r.variant == VariantId::DsmeThermal
        && r.mode == DissipationMode::TracePreserving));
    let t0 = rows[0].coherence_time_kappa_t.unwrap();
    assert!(rows.iter().all(|r| r.coherence_time_kappa_t == Some(t0)));
    let manifest = read_json(&out.join("sweep_theta.json"));
    assert_eq!(manifest["kind"], "sweep");
    assert_eq!(manifest["points"].as_array().unwrap().len(), 3);
}

#[test]
fn unsorted_sweep_values_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let config = write_config(tmp.path(), SMALL);
    let res = optomech(&[
        "sweep",
        "--config",
        &config,
        "--axis",
        "r",
        "--values",
        "0.5,0.1",
        "--out",
        tmp.path().join("out").to_str().unwrap(),
    ]);
    assert!(!res.status.success());
}

#[test]
fn validate_reports_every_check() {
    let res = optomech(&["validate"]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stdout));
    let stdout = String::from_utf8_lossy(&res.stdout);
    assert!(stdout.lines().count() >= 9);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
}

#[test]
fn preset_dry_run_writes_plan() {
    let tmp = TempDir::new().unwrap();
    let res = optomech(&["preset", "fig3a", "--dry-run", "--out", tmp.path().to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let plan = read_json(&tmp.path().join("fig3a_plan.json"));
    let sweeps = plan["sweeps"].as_array().unwrap();
    assert_eq!(sweeps.len(), 2);
    assert_eq!(sweeps[0]["grid"]["values"].as_array().unwrap().len(), 13);
}

#[test]
fn unknown_preset_is_rejected() {
    let tmp = TempDir::new().unwrap();
    let res = optomech(&["preset", "fig5", "--out", tmp.path().to_str().unwrap()]);
    assert!(!res.status.success());
}
