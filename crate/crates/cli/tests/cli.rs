use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mapf-mech"))
}

fn maps() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../maps")
}

fn open_map(dir: &Path, w: usize, h: usize) -> PathBuf {
    let path = dir.join(format!("open-{w}-{h}.map"));
    let rows: String = (0..h).map(|_| ".".repeat(w) + "\n").collect();
    fs::write(&path, format!("type octile\nheight {h}\nwidth {w}\nmap\n{rows}")).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().unwrap()
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| panic!("{e}: {}", String::from_utf8_lossy(&out.stdout)))
}

#[test]
fn single_agent_fcfs_pays_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let map = open_map(dir.path(), 6, 6);
    let out = run(&["run", "--map", map.to_str().unwrap(), "--agents", "1", "--mechanism", "fcfs"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    assert_eq!(v["payments"], serde_json::json!([0.0]));
    assert_eq!(v["success"], Value::Bool(true));
    assert_eq!(v["m"], 1);
}

#[test]
fn repeated_mcpp_runs_are_byte_identical() {
    let map = maps().join("random-32-32-20.map");
    let args = [
        "run", "--map", map.to_str().unwrap(), "--agents", "40", "--seed", "9", "--mechanism", "mcpp", "--samples", "100", "--no-timing",
    ];
    let a = run(&args);
    let b = run(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(json(&a)["m"], 100);
}

#[test]
fn timeout_reports_the_limit() {
    let map = maps().join("random-32-32-20.map");
    let out = run(&["run", "--map", map.to_str().unwrap(), "--agents", "500", "--mechanism", "pcbs", "--time-limit", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let v = json(&out);
    assert_eq!(v["success"], Value::Bool(false));
    assert_eq!(v["runtime_s"].as_f64(), Some(1.0));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("mapf-mech: error: timeout:"));
}

#[test]
fn usage_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let map = open_map(dir.path(), 4, 4);
    let out = run(&["run", "--map", map.to_str().unwrap(), "--mechanism", "pcbs"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("mapf-mech: error: usage:"));
    let out = run(&["run", "--map", "/nonexistent.map", "--agents", "1", "--mechanism", "pcbs"]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).starts_with("mapf-mech: error: io:"));
}

#[test]
fn scenario_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let map = open_map(dir.path(), 3, 3);
    let scenario = dir.path().join("cross.json");
    fs::write(
        &scenario,
        r#"{"version": 1, "map": "open-3-3", "layers": 1, "agents": [
            {"id": 0, "start": [0,1,0], "goal": [2,1,0], "cost": 0.1, "value": 1.0},
            {"id": 1, "start": [1,0,0], "goal": [1,2,0], "cost": 0.2, "value": 1.0}]}"#,
    )
    .unwrap();
    for mech in ["pcbs", "epbs"] {
        let out = run(&["run", "--map", map.to_str().unwrap(), "--scenario", scenario.to_str().unwrap(), "--mechanism", mech]);
        let v = json(&out);
        assert!((v["social_welfare"].as_f64().unwrap() - 1.3).abs() < 1e-12);
        assert!((v["payments"][1].as_f64().unwrap() - 0.1).abs() < 1e-12);
    }
    let scen = dir.path().join("rows.scen");
    fs::write(&scen, "version 1\n0\topen-3-3.map\t3\t3\t0\t0\t2\t2\t4\n0\topen-3-3.map\t3\t3\t2\t0\t0\t2\t4\n").unwrap();
    let out = run(&["run", "--map", map.to_str().unwrap(), "--scenario", scen.to_str().unwrap(), "--mechanism", "mcpp", "--samples", "4"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["n"], 2);
}

fn write_config(dir: &Path, body: &str) -> PathBuf {
    let path = dir.join("config.json");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn batch_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let map = open_map(dir.path(), 8, 8);
    let config = write_config(
        dir.path(),
        &format!(
            r#"{{"map": "{}", "agents": [2, 4], "instances": 3, "mechanisms": ["pcbs", "epbs", "mcpp", "fcfs"],
                "samples": [2, 8], "seed": 5, "time_limit_s": 60, "record_runtime": false}}"#,
            map.file_name().unwrap().to_str().unwrap()
        ),
    );
    let out_a = dir.path().join("a/results.csv");
    let out_b = dir.path().join("b/results.csv");
    for out in [&out_a, &out_b] {
        let o = run(&["batch", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    }
    let a = fs::read_to_string(&out_a).unwrap();
    assert_eq!(a, fs::read_to_string(&out_b).unwrap());
    let lines: Vec<&str> = a.lines().collect();
    assert_eq!(lines[0], "# mapf-mech results v1");
    assert_eq!(
        lines[1],
        "map,layers,n,instance_seed,mechanism,m,success,runtime_s,social_welfare,sum_payments,max_payment,num_zero_payment_agents"
    );
    // 2 agent counts × 3 instances × (pcbs, epbs, mcpp×2, fcfs).
    assert_eq!(lines.len(), 2 + 2 * 3 * 5);
    let summary = fs::read_to_string(dir.path().join("a/results.summary.csv")).unwrap();
    assert_eq!(summary, fs::read_to_string(dir.path().join("b/results.summary.csv")).unwrap());
    assert!(summary.lines().next().unwrap().contains("Student-t"));
    let payments = fs::read_to_string(dir.path().join("a/results.payments.csv")).unwrap();

    // A second run over the same output adds nothing.
    let o = run(&["batch", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out_a).unwrap(), a);
    assert_eq!(fs::read_to_string(dir.path().join("a/results.payments.csv")).unwrap(), payments);

    // Dropping rows and resuming restores the same file.
    let truncated: String = lines[..lines.len() - 4].iter().map(|l| format!("{l}\n")).collect();
    fs::write(&out_a, truncated).unwrap();
    let o = run(&["batch", config.to_str().unwrap(), "--out", out_a.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(fs::read_to_string(&out_a).unwrap(), a);
}

#[test]
fn fcfs_batch_matches_isolated_welfare() {
    let dir = tempfile::tempdir().unwrap();
    let map = open_map(dir.path(), 5, 5);
    let config = write_config(
        dir.path(),
        &format!(r#"{{"map": "{}", "agents": [1], "instances": 6, "mechanisms": ["fcfs"]}}"#, map.display()),
    );
    let out = dir.path().join("r.csv");
    let o = run(&["batch", config.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let world = mapf_mech::load_map(&fs::read_to_string(&map).unwrap()).unwrap();
    let mut reader = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(&out).unwrap();
    let mut rows = 0;
    for rec in reader.deserialize::<std::collections::HashMap<String, String>>() {
        let rec = rec.unwrap();
        let seed: u64 = rec["instance_seed"].parse().unwrap();
        let inst = mapf_mech::sample_instance(&world, 1, seed, &Default::default()).unwrap();
        let a = inst.agents[0];
        let d = world.isolated_distance(a.start, a.goal).unwrap() as f64;
        let isolated = (a.value - a.cost_rate * d).max(0.0);
        let sw: f64 = rec["social_welfare"].parse().unwrap();
        assert!((sw - isolated).abs() < 1e-12);
        assert!(!rec["runtime_s"].is_empty());
        rows += 1;
    }
    assert_eq!(rows, 6);
    let summary = fs::read_to_string(dir.path().join("r.summary.csv")).unwrap();
    let row = summary.lines().nth(2).unwrap();
    assert!(row.contains(",fcfs,1,6,1.0,"), "{row}");
    assert_eq!(row.split(',').nth(11), Some("1.0"));
}

#[test]
fn verify_suites_pass() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["verify", "--suite", "oracle", "--instances", "10", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["oracle"]["violations"], serde_json::json!([]));
    let out = run(&["verify", "--suite", "ir", "--instances", "6", "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(json(&out)["ir"]["runs"], 24);
}

#[test]
fn injected_payment_fault_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "verify", "--suite", "ir", "--instances", "2", "--inject-payment-fault", "--out-dir", dir.path().to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.starts_with("mapf-mech: error: violation:"), "{stderr}");
    let file = fs::read_dir(dir.path()).unwrap().next().unwrap().unwrap().path();
    let cx: Value = serde_json::from_str(&fs::read_to_string(file).unwrap()).unwrap();
    assert_eq!(cx["scenario"]["version"], 1);
    assert!(!cx["detail"]["violations"].as_array().unwrap().is_empty());
}
