use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn rrl(args: &[&str]) -> Output {
    rrl_env(args, &[])
}

fn rrl_env(args: &[&str], env: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_rrl"));
    cmd.args(args).env_remove("RRL_MAX_UNIVERSE");
    for (k, v) in env {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn json(o: &Output) -> Value {
    serde_json::from_slice(&o.stdout).expect("json on stdout")
}

fn check<'a>(report: &'a Value, name: &str) -> &'a Value {
    report["checks"].as_array().unwrap().iter().find(|c| c["check"] == name).expect("check present")
}

fn write(dir: &Path, name: &str, body: &Value) -> String {
    let path = dir.join(name);
    std::fs::write(&path, body.to_string()).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn fairness_row() {
    let o = rrl(&["verify", "--check", "fairness", "--n", "4"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    let c = check(&r, "fairness");
    assert_eq!(c["metrics"]["p_one"], serde_json::json!({ "num": 1, "den": 2 }));
    assert!(String::from_utf8_lossy(&o.stderr).contains("P=1/2"));
    assert_eq!(r["config"]["n"], 4);
}

#[test]
fn impossibility_row() {
    let o = rrl(&["verify", "--check", "impossibility", "--n", "4", "--format", "csv"]);
    assert_eq!(code(&o), 0);
    let text = String::from_utf8(o.stdout).unwrap();
    assert!(text.contains("survivors: 0"));
    assert!(text.lines().any(|l| l == "impossibility,survivors,0"));
    assert!(text.lines().nth(1).unwrap().starts_with("config,resolved,"));
}

#[test]
fn best_response_row_nonadjacent() {
    let o = rrl(&["verify", "--check", "best-response", "--n", "4", "--honest", "nonadjacent"]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stderr).contains("max=25/64"));
    let r = json(&o);
    assert_eq!(check(&r, "best-response")["metrics"]["max"], serde_json::json!({ "num": 25, "den": 64 }));
}

#[test]
fn search_checks_adjacent() {
    let o = rrl(&["verify", "--check", "conditional", "full-control", "best-response", "--honest", "adjacent"]);
    assert_eq!(code(&o), 0);
    let r = json(&o);
    assert_eq!(r["passed"], true);
    assert_eq!(check(&r, "best-response")["metrics"]["scripts"], 192);
    assert_eq!(check(&r, "full-control")["metrics"]["exceptions"], 0);
}

#[test]
fn uniformity_and_uniqueness() {
    let o = rrl(&["verify", "--check", "uniformity", "--scripts", "5", "--seed", "9"]);
    assert_eq!(code(&o), 0);
    assert_eq!(check(&json(&o), "uniformity")["metrics"]["non_uniform"], 0);
    let o = rrl(&["verify", "--check", "uniqueness", "--n", "3"]);
    assert_eq!(code(&o), 0);
    assert!(check(&json(&o), "uniqueness")["summary"].as_str().unwrap().contains("xor"));
}

#[test]
fn monte_carlo_against_exact() {
    let o =
        rrl(&["verify", "--check", "monte-carlo", "--strategy", "parity-rigger", "--samples", "20000", "--seed", "3"]);
    assert_eq!(code(&o), 0);
    let c = check(&json(&o), "monte-carlo").clone();
    assert_eq!(c["metrics"]["exact"], serde_json::json!({ "num": 25, "den": 64 }));
    assert!(c["metrics"]["z_score"].as_f64().unwrap() <= 4.0);
}

#[test]
fn profitable_deviation_exits_one_with_witness() {
    // A single honest node facing three members can be rigged.
    let o = rrl(&["verify", "--check", "best-response", "--honest", "1", "--space", "adaptive"]);
    assert_eq!(code(&o), 1);
    let r = json(&o);
    let c = check(&r, "best-response");
    assert_eq!(c["passed"], false);
    assert!(c["witness"]["script"]["targets"].is_object());
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let dup = write(
        dir.path(),
        "dup.json",
        &serde_json::json!({ "command": "simulate", "n": 4, "seed": 1, "node_ids": [1, 2, 2, 4] }),
    );
    assert_eq!(code(&rrl(&["simulate", "--config", &dup])), 2);
    let unknown = write(
        dir.path(),
        "unknown.json",
        &serde_json::json!({ "command": "simulate", "n": 4, "seed": 1, "colour": 3 }),
    );
    assert_eq!(code(&rrl(&["simulate", "--config", &unknown])), 2);
    let no_seed = write(dir.path(), "no_seed.json", &serde_json::json!({ "command": "simulate", "n": 4 }));
    assert_eq!(code(&rrl(&["simulate", "--config", &no_seed])), 2);
    assert_eq!(code(&rrl(&["verify", "--check", "fairness", "--n", "3"])), 2);
    assert_eq!(code(&rrl(&["simulate", "--honest", "9"])), 2);
    assert_eq!(code(&rrl(&["verify", "--check", "best-response", "--honest", "all"])), 2);
}

#[test]
fn capacity_exits_three() {
    let o = rrl_env(&["verify", "--check", "fairness", "--n", "4"], &[("RRL_MAX_UNIVERSE", "100")]);
    assert_eq!(code(&o), 3);
    assert_eq!(code(&rrl(&["verify", "--check", "impossibility", "--n", "21"])), 3);
}

#[test]
fn simulate_is_deterministic_and_agrees() {
    let dir = tempfile::tempdir().unwrap();
    let config = write(dir.path(), "sim.json", &serde_json::json!({ "command": "simulate", "n": 4, "seed": 1 }));
    let out = dir.path().join("trace.json");
    let mut runs = Vec::new();
    for _ in 0..2 {
        assert_eq!(code(&rrl(&["simulate", "--config", &config, "--out", out.to_str().unwrap()])), 0);
        runs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(runs[0], runs[1]);
    let x = &runs[0];
    let trace: Value = serde_json::from_slice(x).unwrap();
    let decisions: Vec<&Value> = trace["trace"]["nodes"].as_array().unwrap().iter().map(|n| &n["decision"]).collect();
    assert_eq!(decisions.len(), 4);
    assert!(decisions.iter().all(|d| *d == decisions[0]));
    assert_eq!(trace["config"]["seed"], 1);
    // No temporary files are left next to the output.
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn embedded_config_replays_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first.json");
    let o = rrl(&["verify", "--check", "fairness", "impossibility", "--n", "2", "--out", first.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(String::from_utf8_lossy(&o.stdout).contains("impossibility: PASS"));
    let report: Value = serde_json::from_slice(&std::fs::read(&first).unwrap()).unwrap();
    let second = dir.path().join("second.json");
    let mut config = report["config"].clone();
    config["output"]["path"] = Value::String(second.to_str().unwrap().to_string());
    let path = write(dir.path(), "replay.json", &config);
    assert_eq!(code(&rrl(&["verify", "--config", &path])), 0);
    let again: Value = serde_json::from_slice(&std::fs::read(&second).unwrap()).unwrap();
    assert_eq!(again["checks"], report["checks"]);
}

#[test]
fn schema_lists_every_config_field() {
    let o = rrl(&["schema"]);
    assert_eq!(code(&o), 0);
    let schema: Value = serde_json::from_slice(&o.stdout).unwrap();
    let mut props: Vec<&String> = schema["properties"].as_object().unwrap().keys().collect();
    let report = json(&rrl(&["verify", "--check", "impossibility", "--n", "2"]));
    let mut fields: Vec<&String> = report["config"].as_object().unwrap().keys().collect();
    props.sort();
    fields.sort();
    assert_eq!(props, fields);
    assert_eq!(schema["required"], serde_json::json!(["command", "n", "seed"]));
}
