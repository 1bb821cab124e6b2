use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn branchsim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_branchsim"))
        .args(args)
        .env_remove("BRANCHSIM_THREADS")
        .output()
        .expect("spawn branchsim")
}

fn stdout(args: &[&str]) -> String {
    let out = branchsim(args);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

fn code(args: &[&str]) -> i32 {
    branchsim(args).status.code().unwrap()
}

fn csv_rows(text: &str) -> (Vec<String>, Vec<Vec<f64>>) {
    let mut lines = text.lines();
    let header = lines.next().unwrap().split(',').map(String::from).collect();
    let rows = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    (header, rows)
}

fn write_record(dir: &Path, name: &str, args: &[&str]) -> std::path::PathBuf {
    let path = dir.join(name);
    let mut all = args.to_vec();
    all.extend(["--output", path.to_str().unwrap()]);
    stdout(&all);
    path
}

#[test]
fn equal_pair_csv_has_ratio_one() {
    let (header, rows) = csv_rows(&stdout(&["eq5", "--doublings", "6", "--format", "csv"]));
    assert_eq!(header, ["t", "countA", "countB", "residualCount", "ratio"]);
    assert_eq!(rows.len(), 7);
    for (j, row) in rows.iter().enumerate() {
        assert_eq!(row[1], row[2]);
        assert_eq!(row[1], 2f64.powi(j as i32 + 1));
        assert_eq!(row[3], 1.0);
        assert_eq!(row[4], 1.0);
    }
}

#[test]
fn unequal_pair_excluding_residual() {
    let text = stdout(&["eq6", "--doublings", "20", "--policy", "exclude"]);
    let v: Value = serde_json::from_str(&text).unwrap();
    assert_eq!(v["summary"]["finalCountA"], 2_097_151.0);
    assert_eq!(v["summary"]["finalCountB"], 1_048_575.0);
    assert_eq!(v["engine_mode"], "exact");
}

#[test]
fn repeated_runs_are_byte_identical() {
    for args in [
        &["eq6", "--doublings", "8", "--format", "csv"][..],
        &["gaussian", "--cells", "shells", "--periods", "4"],
        &["golden", "--horizon", "40"],
        &["multiparticle", "--particles", "20", "--events", "2000", "--seed", "7"],
    ] {
        assert_eq!(stdout(args), stdout(args), "{args:?}");
    }
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(code(&["frobnicate"]), 1);
    assert_eq!(code(&["eq5", "--mode", "sideways"]), 1);
    assert_eq!(code(&["--help"]), 0);

    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"name\": 1}").unwrap();
    assert_eq!(code(&["run", bad.to_str().unwrap()]), 2);
    assert_eq!(code(&["eq5", "--z", "1.5"]), 2);
    assert_eq!(code(&["regime", "--rate=-1"]), 2);

    assert_eq!(code(&["eq5", "--population-cap", "10"]), 3);

    let missing = dir.path().join("missing.json");
    assert_eq!(code(&["analyze", missing.to_str().unwrap()]), 4);
}

#[test]
fn analyze_reproduces_summary() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_record(dir.path(), "eq6.json", &["eq6", "--doublings", "6"]);
    let record: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let summary: Value = serde_json::from_str(&stdout(&["analyze", path.to_str().unwrap(), "--rerun"])).unwrap();
    assert_eq!(summary, record["summary"]);
}

#[test]
fn analyze_rejects_tampered_records() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_record(dir.path(), "eq5.json", &["eq5", "--doublings", "4"]);
    let mut record: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();

    record["summary"]["finalCountA"] = Value::from(17.0);
    std::fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(code(&["analyze", path.to_str().unwrap()]), 4);

    record["summary"]["finalCountA"] = Value::from(32.0);
    std::fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(code(&["analyze", path.to_str().unwrap()]), 0);

    record["rows"][4][1] = Value::from(31.0);
    std::fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(code(&["analyze", path.to_str().unwrap()]), 4);
}

#[test]
fn rerun_detects_altered_rows() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_record(dir.path(), "eq5.json", &["eq5", "--doublings", "4"]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut record: Value = serde_json::from_str(&text).unwrap();
    let rows = record["rows"].as_array_mut().unwrap();
    rows[0][3] = Value::from(2.0);
    std::fs::write(&path, serde_json::to_string(&record).unwrap()).unwrap();
    assert_eq!(code(&["analyze", path.to_str().unwrap()]), 0);
    assert_eq!(code(&["analyze", path.to_str().unwrap(), "--rerun"]), 4);
}

#[test]
fn print_config_echoes_resolved_scenario() {
    let v: Value = serde_json::from_str(&stdout(&["eq6", "--mode", "aggregated", "--print-config"])).unwrap();
    assert_eq!(v["command"], "scenario");
    assert_eq!(v["config"]["mode"], "aggregated");
    assert_eq!(v["config"]["components"].as_array().unwrap().len(), 2);

    let v: Value = serde_json::from_str(&stdout(&["golden", "--horizon", "10", "--print-config"])).unwrap();
    assert_eq!(v["command"], "golden");
    assert!(v["scenario"]["components"].is_array());
}

#[test]
fn config_file_round_trips_through_print_config() {
    let dir = tempfile::tempdir().unwrap();
    let v: Value = serde_json::from_str(&stdout(&["eq5", "--doublings", "5", "--print-config"])).unwrap();
    let path = dir.path().join("eq5.json");
    std::fs::write(&path, serde_json::to_string(&v["config"]).unwrap()).unwrap();
    let from_file = stdout(&["run", path.to_str().unwrap(), "--format", "csv"]);
    assert_eq!(from_file, stdout(&["eq5", "--doublings", "5", "--format", "csv"]));
}

#[test]
fn golden_csv_columns() {
    let (header, rows) = csv_rows(&stdout(&["golden", "--horizon", "30", "--format", "csv"]));
    assert_eq!(header, ["t", "meanM", "lnDeviation", "aliveClasses", "totalLogCount"]);
    assert!(!rows.is_empty());
    assert!(rows.windows(2).all(|w| w[0][0] <= w[1][0]));
    assert!(rows.iter().all(|r| r[1] > 0.0 && r[1] <= 1.0));
}

#[test]
fn timing_is_opt_in() {
    let plain: Value = serde_json::from_str(&stdout(&["eq5", "--doublings", "2"])).unwrap();
    assert!(plain.get("wall_time_seconds").is_none());
    let timed: Value = serde_json::from_str(&stdout(&["eq5", "--doublings", "2", "--timing"])).unwrap();
    assert!(timed["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn plot_data_is_whitespace_separated() {
    let text = stdout(&["eq5", "--doublings", "3", "--plot-data"]);
    let data: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(data.len(), 4);
    assert!(data.iter().all(|l| l.split_whitespace().count() == 5));
}

#[test]
fn regime_sweep_ignores_thread_count() {
    let args = |threads: &'static str| {
        ["regime", "--sweep-mass", "1e-24g:1g:9", "--threads", threads, "--format", "csv"]
    };
    let one = stdout(&args("1"));
    assert_eq!(one, stdout(&args("3")));
    let (header, rows) = csv_rows(&one);
    assert_eq!(header[0], "massGrams");
    assert_eq!(rows.len(), 9);
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0]));
}

#[test]
fn regime_threads_from_environment() {
    let run = |env: &str| {
        Command::new(env!("CARGO_BIN_EXE_branchsim"))
            .args(["regime", "--sweep-mass", "1e-20g:1e-10g:4"])
            .env("BRANCHSIM_THREADS", env)
            .output()
            .unwrap()
    };
    let ok = run("2");
    assert!(ok.status.success());
    assert_eq!(String::from_utf8(ok.stdout).unwrap(), stdout(&["regime", "--sweep-mass", "1e-20g:1e-10g:4"]));
    assert_eq!(run("zero").status.code(), Some(1));
}
