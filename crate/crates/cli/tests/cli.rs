use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"{
  "network": { "bs_count": 6, "rng_seed": 3 },
  "generation": { "panel_area_range_m2": [1.0, 2.5] },
  "dispatch": { "scenario_cap": 8 }
}"#;

fn gridshare(dir: &Path, args: &[&str]) -> Output {
    let config = dir.join("config.json");
    if !config.exists() {
        std::fs::write(&config, SMALL).unwrap();
    }
    let out = Command::new(env!("CARGO_BIN_EXE_gridshare"))
        .arg("--config")
        .arg(&config)
        .arg("--output")
        .arg(dir)
        .args(args)
        .output()
        .unwrap();
    out
}

fn ok(dir: &Path, args: &[&str]) {
    let out = gridshare(dir, args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

#[test]
fn simulate_is_byte_reproducible() {
    let (a, b, c) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--seed", "11", "--iterations", "4", "simulate", "--knowledge", "zero,perfect,partial"];
    ok(a.path(), &args);
    ok(b.path(), &args);
    for name in ["simulate.csv", "manifest.json"] {
        assert_eq!(read(a.path(), name), read(b.path(), name), "{name}");
    }
    ok(c.path(), &["--seed", "12", "--iterations", "4", "simulate", "--knowledge", "zero,perfect,partial"]);
    assert_ne!(read(a.path(), "simulate.csv"), read(c.path(), "simulate.csv"));
    // Header plus four modes times three knowledge levels.
    assert_eq!(read(a.path(), "simulate.csv").lines().count(), 13);
}

#[test]
fn sweep_is_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["--iterations", "3", "sweep", "--parameter", "sharing-range", "--values", "0.5,2", "--modes", "hybrid"];
    ok(a.path(), &args);
    ok(b.path(), &args);
    let csv = read(a.path(), "sweep.csv");
    assert_eq!(csv, read(b.path(), "sweep.csv"));
    assert_eq!(csv.lines().count(), 3);
    assert!(csv.starts_with("parameter,value,sharing_mode"));
}

#[test]
fn placement_and_lines() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["place"]);
    let placement = read(dir.path(), "placement.csv");
    assert_eq!(placement.lines().count(), 7);
    assert!(placement.starts_with("bs,x_km,y_km,panel_area_m2"));

    ok(dir.path(), &["cluster", "--method", "agglomerative-sea"]);
    let rows: Vec<String> = read(dir.path(), "association.csv").lines().map(str::to_string).collect();
    assert_eq!(rows.len(), 6);
    assert!(rows.iter().all(|r| r.split(',').count() == 6));
    assert!(read(dir.path(), "edges.csv").starts_with("from,to,length_km"));
    let summary: serde_json::Value = serde_json::from_str(&read(dir.path(), "cluster.json")).unwrap();
    assert!(summary.is_object());
}

#[test]
fn dispatch_writes_schedule_and_cost() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["dispatch", "--knowledge", "partial", "--mean", "--deviation", "0.1"]);
    let schedule = read(dir.path(), "schedule.csv");
    assert!(schedule.starts_with("bs,slot,q_g,q_e,q_b,q_s,q_beta,battery"));
    assert_eq!(schedule.lines().count(), 1 + 6 * 24);
    assert!(read(dir.path(), "lines.csv").starts_with("from,to,slot,q_fwd,q_delivered"));
    let cost: serde_json::Value = serde_json::from_str(&read(dir.path(), "cost.json")).unwrap();
    assert!(cost.is_object());
}

#[test]
fn three_station_table() {
    let dir = tempfile::tempdir().unwrap();
    ok(dir.path(), &["replicate-three-bs", "--prices", "0.1,0.8"]);
    let table = read(dir.path(), "three_bs.csv");
    assert_eq!(table.lines().count(), 3);
    let row: Vec<f64> = table.lines().nth(1).unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    // At c_g = 0.1 every strategy costs the same.
    assert!(row[1..5].iter().all(|&c| (c - row[1]).abs() <= 1e-6));
}

#[test]
fn invalid_config_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("config.json"), r#"{ "battery": { "initial_wh": -1 } }"#).unwrap();
    let out = gridshare(dir.path(), &["place"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("initial_wh"));
}
