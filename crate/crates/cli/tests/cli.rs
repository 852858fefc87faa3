use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn gossip(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gossip")).args(args).output().expect("binary runs")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bundled(name: &str) -> String {
    configs().join(name).display().to_string()
}

fn write_config(dir: &Path, name: &str, value: &Value) -> String {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_string_pretty(value).unwrap()).unwrap();
    path.display().to_string()
}

fn crit_value() -> Value {
    serde_json::from_str(&fs::read_to_string(configs().join("paper_5_3_crit.json")).unwrap()).unwrap()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn simulate_writes_trajectory_and_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("run");
    let o = gossip(&["simulate", &bundled("paper_5_3_crit.json"), "--out", out.to_str().unwrap(), "--steps", "50"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let csv = fs::read_to_string(out.join("trajectory.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("trial,k,x_1,x_2,x_3,x_4,H,h,spread,L"));
    assert_eq!(lines.next(), Some("0,0,1,2,3,4,4,1,3,5"));
    assert_eq!(csv.lines().count(), 52);
    let manifest: Value = serde_json::from_str(&fs::read_to_string(out.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["resolved_config"]["steps"], json!(50));
    assert!(manifest["finished_at"].is_string());
}

#[test]
fn row_sum_error_names_row() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = crit_value();
    cfg["graph"]["rows"][2] = json!([0.3, 0, 0, 0.6]);
    let path = write_config(tmp.path(), "bad.json", &cfg);
    let o = gossip(&["simulate", &path, "--out", tmp.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("row 2"), "{}", stderr(&o));
}

#[test]
fn same_seed_gives_identical_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |name: &str| {
        let out = tmp.path().join(name);
        let o = gossip(&["simulate", &bundled("paper_5_3_high.json"), "--seed", "42", "--out", out.to_str().unwrap()]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("trajectory.csv")).unwrap()
    };
    assert_eq!(run("a"), run("b"));
}

#[test]
fn experiment_starts_at_five() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("exp");
    let o = gossip(&[
        "experiment",
        &bundled("paper_5_3.json"),
        "--trials",
        "200",
        "--steps",
        "20",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let agg: Value = serde_json::from_str(&fs::read_to_string(out.join("aggregate.json")).unwrap()).unwrap();
    assert_eq!(agg["checkpoints"][0]["k"], json!(0));
    assert_eq!(agg["checkpoints"][0]["meanL"], json!(5.0));
    assert!(out.join("theory.json").exists());
}

#[test]
fn zero_trials_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gossip(&["experiment", &bundled("paper_5_3.json"), "--trials", "0", "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(!tmp.path().join("manifest.json").exists());
}

#[test]
fn manifest_reproduces_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let first = tmp.path().join("first");
    let o = gossip(&[
        "experiment",
        &bundled("paper_5_3_low.json"),
        "--trials",
        "300",
        "--set",
        "schedules.T.value=0.3",
        "--out",
        first.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let second = tmp.path().join("second");
    let manifest = first.join("manifest.json");
    let o = gossip(&["experiment", manifest.to_str().unwrap(), "--out", second.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    for name in ["aggregate.csv", "theory.json"] {
        assert_eq!(fs::read(first.join(name)).unwrap(), fs::read(second.join(name)).unwrap(), "{name}");
    }
    let m: Value = serde_json::from_str(&fs::read_to_string(manifest).unwrap()).unwrap();
    assert_eq!(m["resolved_config"]["schedules"]["T"]["value"], json!(0.3));
    assert_eq!(m["resolved_config"]["trials"], json!(300));
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("sw");
    let o = gossip(&["sweep", &bundled("paper_5_3_sweep.json"), "--trials", "50", "--steps", "20", "--out", out.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let mut dirs: Vec<PathBuf> = fs::read_dir(&out).unwrap().map(|e| e.unwrap().path()).filter(|p| p.is_dir()).collect();
    dirs.sort();
    assert_eq!(dirs.len(), 3);
    let mut statuses = Vec::new();
    for d in &dirs {
        assert!(d.join("aggregate.csv").exists());
        let report: Value = serde_json::from_str(&fs::read_to_string(d.join("theory.json")).unwrap()).unwrap();
        let beer = report["conditions"].as_array().unwrap().iter().find(|c| c["id"] == "BEER_CLASSIFY").unwrap().clone();
        statuses.push(beer["claims"][0].clone());
    }
    assert_eq!(statuses, vec![json!("agreement"), json!("oscillation_in_expectation"), json!("divergence_in_expectation")]);
}

#[test]
fn sweep_without_axis_is_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let o = gossip(&["sweep", &bundled("paper_5_3.json"), "--out", tmp.path().to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn check_reports_critical_oscillation() {
    let o = gossip(&["check", &bundled("paper_5_3_crit.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(report["D0"].as_f64().unwrap().abs() < 1e-15);
    let beer = report["conditions"].as_array().unwrap().iter().find(|c| c["id"] == "BEER_CLASSIFY").unwrap().clone();
    assert_eq!(beer["claims"][0], json!("oscillation_in_expectation"));
}

#[test]
fn check_repulsion_free_agrees() {
    let o = gossip(&[
        "check",
        &bundled("paper_5_3.json"),
        "--set",
        "probs.alpha=0.5",
        "--set",
        "probs.beta=0.5",
        "--set",
        "probs.gamma=0",
        "--set",
        "schedules.T.value=0.5",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let report: Value = serde_json::from_slice(&o.stdout).unwrap();
    let sym = report["conditions"].as_array().unwrap().iter().find(|c| c["id"] == "SYM_AGREE").unwrap().clone();
    assert_eq!(sym["status"], json!("Guaranteed"));
}

#[test]
fn check_disconnected_cites_weak_connectivity() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = crit_value();
    cfg["graph"]["rows"] = json!([[0, 1, 0, 0], [1, 0, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]]);
    let path = write_config(tmp.path(), "split.json", &cfg);
    let o = gossip(&["check", &path]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("weakly connected"), "{}", stderr(&o));
}

#[test]
fn check_reads_graph_file_beside_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("ring.csv"), "0,0.5,0.5\n0.5,0,0.5\n0.5,0.5,0\n").unwrap();
    let mut cfg = crit_value();
    cfg["graph"] = json!({"source": "file", "path": "ring.csv"});
    cfg["initial"] = json!({"kind": "ramp"});
    let path = write_config(tmp.path(), "file.json", &cfg);
    let o = gossip(&["check", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
}

#[test]
fn oracle_exit_codes() {
    let tmp = tempfile::tempdir().unwrap();
    let mut cfg = crit_value();
    cfg["graph"] = json!({"source": "generate", "topology": {"kind": "complete"}, "n": 3, "seed": 0});
    cfg["initial"] = json!({"kind": "ramp"});
    cfg["probs"] = json!({"alpha": 0.2, "beta": 0.1, "gamma": 0.7});
    cfg["schedules"]["S"]["value"] = json!(1.7);
    let path = write_config(tmp.path(), "k3.json", &cfg);
    let o = gossip(&["oracle", &path]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    assert!(String::from_utf8_lossy(&o.stdout).contains("over 100 states"));

    let o = gossip(&["oracle", &bundled("paper_5_3_crit.json")]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    cfg["graph"]["n"] = json!(5);
    let path = write_config(tmp.path(), "k5.json", &cfg);
    let o = gossip(&["oracle", &path]);
    assert_eq!(o.status.code(), Some(2), "{}", stderr(&o));
}

#[test]
fn bad_thread_setting_is_config_error() {
    let o = Command::new(env!("CARGO_BIN_EXE_gossip"))
        .args(["check", &bundled("paper_5_3.json")])
        .env("GOSSIP_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn thread_count_does_not_change_output() {
    let tmp = tempfile::tempdir().unwrap();
    let run = |threads: &str| {
        let out = tmp.path().join(threads);
        let o = Command::new(env!("CARGO_BIN_EXE_gossip"))
            .args(["experiment", &bundled("paper_5_3_high.json"), "--trials", "3000", "--steps", "40"])
            .args(["--out", out.to_str().unwrap()])
            .env("GOSSIP_THREADS", threads)
            .output()
            .unwrap();
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        fs::read(out.join("aggregate.csv")).unwrap()
    };
    assert_eq!(run("1"), run("4"));
}
