use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use tempfile::TempDir;

fn desk() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/desk-2x2.toml")
}

fn mmab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mmab"))
        .args(args)
        .env_remove("MMAB_OUT_DIR")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_config(dir: &TempDir, name: &str, text: &str) -> String {
    let path = dir.path().join(name);
    fs::write(&path, text).unwrap();
    path.display().to_string()
}

const SMALL: &str = r#"
[instance]
num_players = 2
num_channels = 2
max_occupancy = 2
means = [[0.9, 0.3], [0.5, 0.2], [0.8, 0.25], [0.6, 0.15]]

[noise]
kind = "truncated-gaussian"
sigma = 0.05

[schedule]
t0 = 200
"#;

#[test]
fn desk_config_validates() {
    let out = mmab(&["validate", "--config", desk().to_str().unwrap()]);
    assert!(out.status.success());
    assert!(stdout(&out).contains("valid"));
    assert!(!stdout(&out).contains("warning"));
}

#[test]
fn too_many_players_is_fatal() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("num_players = 2", "num_players = 5");
    let out = mmab(&["validate", "--config", &write_config(&dir, "k5.toml", &text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("K <= M*N violated"));
}

#[test]
fn delta_out_of_range_is_reported_with_path() {
    let dir = TempDir::new().unwrap();
    let text = SMALL.replace("t0 = 200", "t0 = 200\ndelta = 1.5");
    let out = mmab(&["validate", "--config", &write_config(&dir, "d.toml", &text)]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stdout(&out).contains("schedule.delta"));
}

#[test]
fn missing_config_names_the_file() {
    let out = mmab(&["validate", "--config", "/nonexistent/x.toml"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("/nonexistent/x.toml"));
}

#[test]
fn oracle_json_record() {
    let out = mmab(&["oracle", "--config", desk().to_str().unwrap(), "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_str(stdout(&out).trim()).unwrap();
    assert_eq!(v["solution"]["optimal_profile"], serde_json::json!([1, 2]));
    assert_eq!(v["solution"]["j1"], 1.5);
    assert_eq!(v["separability"]["passed"], true);
}

#[test]
fn run_writes_one_trace_per_seed_and_reproduces() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.toml", SMALL);
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    for out in [&a, &b] {
        let o = mmab(&[
            "run", "--config", &cfg, "--seed", "1,2,3", "--horizon", "20000", "--out", out.to_str().unwrap(),
        ]);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    }
    for seed in 1..=3 {
        let name = format!("trace-seed-{seed}.csv");
        let ta = fs::read(a.join(&name)).unwrap();
        assert_eq!(ta, fs::read(b.join(&name)).unwrap());
        let text = String::from_utf8(ta).unwrap();
        let mut lines = text.lines();
        assert_eq!(lines.next(), Some("time,epoch,phase,a1,a2,regret"));
        let rows: Vec<&str> = lines.collect();
        assert_eq!(rows.len(), 20000);
        assert!(rows.iter().all(|r| r.rsplit(',').next().unwrap().parse::<f64>().unwrap() >= 0.0));
        assert!(a.join(format!("summary-seed-{seed}.json")).exists());
    }
    let agg: serde_json::Value = serde_json::from_slice(&fs::read(a.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["seeds"], serde_json::json!([1, 2, 3]));
    assert!(agg["fraction_optimal"].is_number());
    let manifest: serde_json::Value = serde_json::from_slice(&fs::read(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["runs"].as_array().unwrap().len(), 3);
    assert_eq!(fs::read_to_string(a.join("config.toml")).unwrap(), SMALL);
}

#[test]
fn duplicate_seeds_rejected() {
    let dir = TempDir::new().unwrap();
    let o = mmab(&[
        "run", "--config", desk().to_str().unwrap(), "--seed", "4,4", "--out", dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}

#[test]
fn output_directory_from_environment() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.toml", SMALL);
    let target = dir.path().join("from-env");
    let o = Command::new(env!("CARGO_BIN_EXE_mmab"))
        .args(["run", "--config", &cfg, "--seed", "7", "--horizon", "500"])
        .env("MMAB_OUT_DIR", &target)
        .output()
        .unwrap();
    assert!(o.status.success());
    assert!(target.join("trace-seed-7.csv").exists());
}

#[test]
fn sweep_rows_per_point_and_seed() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.toml", SMALL);
    let out = dir.path().join("s");
    let o = mmab(&[
        "sweep", "--config", &cfg, "--seed", "1,2", "--horizon", "5000", "--eps-grid", "0.3,0.2,0.1,0.05",
        "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert!(lines[0].starts_with("parameter,value,seed,status"));
    assert_eq!(lines.len(), 1 + 8);
    assert!(lines[1..].iter().all(|l| l.contains(",ok,")));
}

#[test]
fn empty_grid_gives_header_only() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("s");
    let o = mmab(&["sweep", "--config", desk().to_str().unwrap(), "--eps-grid", "", "--out", out.to_str().unwrap()]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn bad_grid_point_recorded_and_sweep_continues() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(&dir, "c.toml", SMALL);
    let out = dir.path().join("s");
    let o = mmab(&[
        "sweep", "--config", &cfg, "--seed", "1", "--horizon", "2000", "--eps-grid", "1.5,0.2", "--horizon-grid",
        "1000", "--out", out.to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let text = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("eps,1.5,1,error"));
    assert!(lines[1].contains("schedule.eps"));
    assert!(lines[2].starts_with("eps,0.2,1,ok,2000"));
    assert!(lines[3].starts_with("horizon,1000,1,ok,1000"));
}

#[test]
fn chain_analyze_outputs() {
    let dir = TempDir::new().unwrap();
    let o = mmab(&[
        "chain-analyze", "--config", desk().to_str().unwrap(), "--eps-grid", "0.3,0.1", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success());
    let csv = fs::read_to_string(dir.path().join("stability.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("0.3,0.35"));
    let classes = fs::read_to_string(dir.path().join("classes.txt")).unwrap();
    assert!(classes.contains("recurrence classes at eps = 0: 5"));
    assert!(classes.contains("optimal state: [(1,2),(0.9,0.6),(C,C)]"));
}

#[test]
fn chain_analyze_rejects_bad_eps() {
    let dir = TempDir::new().unwrap();
    let o = mmab(&[
        "chain-analyze", "--config", desk().to_str().unwrap(), "--eps-grid", "0.3,1.0", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(!o.status.success());
}
