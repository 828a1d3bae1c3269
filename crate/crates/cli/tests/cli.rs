use std::fs;
use std::process::{Command, Output};

fn caw(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_caw"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn pp_sweep_three_rows() {
    let o = caw(&["analyze", "--sweep", "pp", "--x", "10,100,1000"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let text = stdout(&o);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header = rd.headers().unwrap().clone();
    let ok = header.iter().position(|h| h == "ok").unwrap();
    let rows: Vec<_> = rd.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    assert!(rows.iter().all(|r| &r[ok] == "true"));
    assert_eq!(&rows[0][1], "1/2520");
}

#[test]
fn empty_sweep_is_header_only() {
    let o = caw(&["analyze", "--sweep", "pp"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert_eq!(text.lines().count(), 1);
    assert!(text.starts_with("x,product,theta"));
}

#[test]
fn dim_sweep_values() {
    let o = caw(&["analyze", "--sweep", "dim", "--primes", "2,3", "--betas", "1/12,1/24,1/48"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let branching: Vec<u64> = rd.records().map(|r| r.unwrap()[3].parse().unwrap()).collect();
    assert_eq!(branching, vec![432, 2016, 25920]);
}

#[test]
fn analyze_writes_to_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("nc.csv");
    let o = caw(&[
        "analyze", "--sweep", "nc", "--primes", "2,3", "--betas", "1/6", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let text = fs::read_to_string(out).unwrap();
    assert!(text.contains("1/6,2 3,0,24,288"), "{text}");
}

#[test]
fn beta_above_ceiling_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = caw(&[
        "simulate", "--map", "3/2", "--beta", "1/2", "--depth", "3", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("beta"));
}

#[test]
fn unknown_flag_is_a_usage_error() {
    assert_eq!(caw(&["simulate", "--bogus"]).status.code(), Some(2));
}

#[test]
fn simulate_then_replay() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = caw(&[
        "simulate", "--map", "3/2", "--beta", "3/10", "--depth", "12", "--runs", "2", "--seed",
        "7", "--out", d,
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
    assert_eq!(summary["all_passed"], true);
    assert_eq!(summary["runs"].as_array().unwrap().len(), 2);
    assert_eq!(summary["runs"][1]["seed"], 8);

    let run = dir.path().join("run-0001.json");
    let o = caw(&["replay", run.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("transcript identical"));
}

#[test]
fn replay_detects_edits() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path().to_str().unwrap();
    let o = caw(&["simulate", "--map", "3/2", "--beta", "3/10", "--depth", "8", "--out", d]);
    assert_eq!(o.status.code(), Some(0));
    let path = dir.path().join("run-0000.json");
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&path).unwrap()).unwrap();
    v["transcript"]["rounds"][2]["bob_evidence"] = serde_json::json!(["edited"]);
    fs::write(&path, v.to_string()).unwrap();
    assert_eq!(caw(&["replay", path.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn config_file_with_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(
        &cfg,
        r#"{"primes": [2, 3], "map": "3/2", "beta": "1/2", "depth": 6, "seed": 3}"#,
    )
    .unwrap();
    let out = dir.path().join("out");
    // the file's beta is illegal; the flag replaces it
    let o = caw(&[
        "simulate", "--config", cfg.to_str().unwrap(), "--beta", "1/4", "--out",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let run: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out.join("run-0000.json")).unwrap()).unwrap();
    assert_eq!(run["spec"]["beta"], "1/4");
    assert_eq!(run["spec"]["seed"], 3);
    assert_eq!(run["transcript"]["rounds"].as_array().unwrap().len(), 6);
}

#[test]
fn strong_game_from_flags() {
    let dir = tempfile::tempdir().unwrap();
    let o = caw(&[
        "simulate", "--map", "3/2", "--alpha", "1/5", "--gamma", "1/2", "--depth", "10", "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn fstar_depth_one() {
    let o = caw(&["fstar", "--map", "3/2", "--beta0", "1/12", "--depth", "1"]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("branching 432"));
}

#[test]
fn verify_filter() {
    let o = caw(&["verify", "--cases", "20", "--filter", "metric"]);
    assert_eq!(o.status.code(), Some(0));
    let report: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    let props = report["properties"].as_array().unwrap();
    assert_eq!(props.len(), 1);
    assert_eq!(props[0]["name"], "metric_axioms");
}

#[test]
fn injected_fault_fails_verify() {
    let o = caw(&["verify", "--cases", "5", "--filter", "floor", "--inject-fault"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("FAIL transcript_audit_injected"));
}
