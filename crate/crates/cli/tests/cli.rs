use std::path::Path;
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_pcs-shaper"))
}

fn paper_config() -> Value {
    let out = bin().arg("paper-config").output().expect("binary runs");
    assert!(out.status.success());
    serde_json::from_slice(&out.stdout).expect("paper-config prints JSON")
}

fn small(scenario: &str, powers: &[f64]) -> Value {
    let mut cfg = paper_config();
    cfg["scenario"] = json!(scenario);
    cfg["order"] = json!(4);
    cfg["power_dbm"] = json!(powers);
    cfg["solver"]["n_starts"] = json!(4);
    cfg["monte_carlo"]["n_symbols"] = json!(20_000);
    cfg["monte_carlo"]["eve_samples"] = json!(16);
    cfg
}

fn run_in(dir: &Path, cfg: &Value, extra: &[&str]) -> Output {
    let path = dir.join("config.json");
    std::fs::write(&path, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    bin()
        .arg("run")
        .arg(&path)
        .arg("--out")
        .arg(dir.join("out"))
        .args(extra)
        .output()
        .expect("binary runs")
}

fn body(path: &Path) -> Vec<String> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .filter(|l| !l.starts_with('#'))
        .map(str::to_owned)
        .collect()
}

#[test]
fn paper_config_round_trips() {
    let cfg = paper_config();
    assert_eq!(cfg["order"], 8);
    assert_eq!(cfg["power_dbm"].as_array().unwrap().len(), 16);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("defaults.json");
    std::fs::write(&path, cfg.to_string()).unwrap();
    let text = std::fs::read_to_string(&path).unwrap();
    let back = pcs_shaper::ExperimentConfig::from_json(&text).unwrap();
    assert_eq!(back, pcs_shaper::default_paper_config());
}

#[test]
fn design_run_writes_commented_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &small("design_known", &[25.0]), &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("out/design_known.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# "), "{first}");
    assert!(text.contains("\"scenario\""));
    let rows = body(&dir.path().join("out/design_known.csv"));
    assert_eq!(rows.len(), 2);
    assert!(rows[0].starts_with("power_dbm,"));
}

#[test]
fn same_seed_gives_identical_files() {
    let cfg = small("design_known", &[24.0]);
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    assert!(run_in(a.path(), &cfg, &["--seed", "5"]).status.success());
    assert!(run_in(b.path(), &cfg, &["--seed", "5", "--threads", "1"]).status.success());
    assert_eq!(
        body(&a.path().join("out/design_known.csv")),
        body(&b.path().join("out/design_known.csv"))
    );
}

#[test]
fn bad_config_exits_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("design_known", &[25.0]);
    cfg["order"] = json!(3);
    assert_eq!(run_in(dir.path(), &cfg, &[]).status.code(), Some(2));

    let mut cfg = small("design_known", &[25.0]);
    cfg["solver"]["tolerance"] = json!(1e-3);
    assert_eq!(run_in(dir.path(), &cfg, &[]).status.code(), Some(2));

    let cfg = small("design_known", &[25.0]);
    assert_eq!(run_in(dir.path(), &cfg, &["--threads", "0"]).status.code(), Some(2));

    let missing = bin().args(["run", "/nonexistent/config.json"]).output().unwrap();
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn unreachable_threshold_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("design_known", &[20.0]);
    cfg["constraints"]["pre_fec_threshold"] = json!(1e-12);
    let out = run_in(dir.path(), &cfg, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("out/design_known.csv").exists());
}

#[test]
fn small_validation_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = small("validate_ber", &[25.0]);
    cfg["validation"] = json!({
        "pairwise_configs": 5,
        "pairwise_samples": 200_000,
        "ser_distributions": 3,
        "ser_samples": 100_000,
        "seed": 11
    });
    let out = run_in(dir.path(), &cfg, &[]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stdout));
    let rows = body(&dir.path().join("out/validate_ber.csv"));
    assert_eq!(rows[0], "check,passed,detail");
    assert!(rows[1..].iter().all(|r| r.contains(",true,")), "{rows:?}");
}

#[test]
fn failed_check_maps_to_exit_four() {
    let checks = [pcs_shaper::validate::Check {
        name: "demo",
        passed: false,
        detail: String::new(),
    }];
    let err = pcs_shaper::experiments::report_checks(&checks).unwrap_err();
    assert_eq!(err.exit_code(), 4);
}
