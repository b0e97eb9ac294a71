//! End-to-end behaviour of the `varlab` binary.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use sha2::{Digest, Sha256};

fn varlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_varlab")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, cfg: &Value) -> PathBuf {
    let p = dir.join(name);
    std::fs::write(&p, serde_json::to_string_pretty(cfg).unwrap()).unwrap();
    p
}

fn square_config(out: &Path) -> Value {
    json!({
        "experiment": "verify_square_strong",
        "grid": { "dim": 1, "log_side": 8 },
        "weight": { "kind": "flat" },
        "ensemble": { "count": 6 },
        "seed": 5,
        "output_dir": out
    })
}

fn sha(path: &Path) -> String {
    format!("{:x}", Sha256::digest(std::fs::read(path).unwrap()))
}

#[test]
fn shipped_smoke_config_runs() {
    let dir = tempfile::tempdir().unwrap();
    let conf = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../conf/verify_square.json");
    let out = varlab(&["run", conf.to_str().unwrap(), "--output-dir", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["report.json", "summary.csv", "plotdata.csv"] {
        assert!(dir.path().join(f).is_file(), "{f} missing");
    }
}

#[test]
fn outputs_have_documented_columns_and_precision() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "c.json", &square_config(&dir.path().join("out")));
    assert_eq!(varlab(&["run", cfg.to_str().unwrap()]).status.code(), Some(0));
    let summary = std::fs::read_to_string(dir.path().join("out/summary.csv")).unwrap();
    let mut lines = summary.lines();
    assert_eq!(lines.next(), Some("trial_id,lhs,rhs,ratio"));
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(row.len(), 4);
    let mantissa = row[3].split('e').next().unwrap().replace(['.', '-'], "");
    assert_eq!(mantissa.len(), 17, "ratio {}", row[3]);
    let plot = std::fs::read_to_string(dir.path().join("out/plotdata.csv")).unwrap();
    assert!(plot.starts_with("x,y\n"));
}

#[test]
fn precondition_failure_exits_with_config_code() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = square_config(&dir.path().join("out"));
    cfg["exponents"] = json!({ "p": 1.0 });
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = varlab(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("1 < p < inf"));
    assert!(!dir.path().join("out").exists(), "nothing written on config errors");
}

#[test]
fn unknown_keys_and_bad_thread_counts_are_config_errors() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = square_config(&dir.path().join("out"));
    cfg["grid"]["colour"] = json!("red");
    let path = write_config(dir.path(), "c.json", &cfg);
    assert_eq!(varlab(&["run", path.to_str().unwrap()]).status.code(), Some(3));
    assert_eq!(varlab(&["run", dir.path().join("missing.json").to_str().unwrap()]).status.code(), Some(3));
    let good = write_config(dir.path(), "g.json", &square_config(&dir.path().join("out")));
    let out = Command::new(env!("CARGO_BIN_EXE_varlab")).env("VARLAB_THREADS", "many").args(["run", good.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(3));
}

#[test]
fn violated_invariant_exits_two_with_diagnostics() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = square_config(&dir.path().join("out"));
    cfg["options"] = json!({ "baseline": 1e-6 });
    let path = write_config(dir.path(), "c.json", &cfg);
    let out = varlab(&["run", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("frozen baseline") && err.contains("seed"), "{err}");
    assert!(dir.path().join("out/report.json").is_file(), "report still written");
}

#[test]
fn thread_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let mut hashes = Vec::new();
    for threads in ["1", "3"] {
        let out_dir = dir.path().join(format!("out{threads}"));
        let path = write_config(dir.path(), &format!("c{threads}.json"), &square_config(&out_dir));
        let out = Command::new(env!("CARGO_BIN_EXE_varlab")).env("VARLAB_THREADS", threads).args(["run", path.to_str().unwrap()]).output().unwrap();
        assert_eq!(out.status.code(), Some(0));
        hashes.push(sha(&out_dir.join("summary.csv")));
    }
    assert_eq!(hashes[0], hashes[1]);
}

#[test]
fn embedded_config_reproduces_the_report() {
    let dir = tempfile::tempdir().unwrap();
    let first = dir.path().join("first");
    let path = write_config(dir.path(), "c.json", &square_config(&first));
    assert_eq!(varlab(&["run", path.to_str().unwrap()]).status.code(), Some(0));
    let report: Value = serde_json::from_str(&std::fs::read_to_string(first.join("report.json")).unwrap()).unwrap();
    let mut embedded = report["config"].clone();
    assert!(embedded["scales"].is_object() && embedded["options"]["cube_family"].is_string(), "defaults are resolved");
    let second = dir.path().join("second");
    embedded["output_dir"] = json!(second);
    let path = write_config(dir.path(), "e.json", &embedded);
    assert_eq!(varlab(&["run", path.to_str().unwrap()]).status.code(), Some(0));
    assert_eq!(sha(&first.join("summary.csv")), sha(&second.join("summary.csv")));
    assert_eq!(sha(&first.join("plotdata.csv")), sha(&second.join("plotdata.csv")));
}

#[test]
fn list_experiments_shows_the_registry() {
    let out = varlab(&["list-experiments", "--json"]);
    assert!(out.status.success());
    let rows: Vec<Value> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(rows.len(), 14);
    let jump = rows.iter().find(|r| r["name"] == "verify_jump").expect("verify_jump listed");
    assert_eq!(jump["anchor"], "weighted jump inequality for ergodic averages");
    assert_eq!(rows.iter().filter(|r| r["kind"] == "verify").count(), 9);
    let text = String::from_utf8(varlab(&["list-experiments"]).stdout).unwrap();
    assert!(text.contains("verify_good_lambda"));
}

#[test]
fn oracle_ops_print_json() {
    let out = varlab(&["oracle", "jump-brute", "0.5", "0", "1", "0", "1", "0"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["count"], 4);
    let out = varlab(&["oracle", "hvar-brute", "1", "0", "-1", "2"]);
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["value"], 4.0);
    let v: Value = serde_json::from_slice(&varlab(&["oracle", "ball-count", "2", "1"]).stdout).unwrap();
    assert_eq!(v["count"], 5);
    assert_eq!(varlab(&["oracle", "nonsense"]).status.code(), Some(3));
    assert_eq!(varlab(&["oracle", "hvar", "0.5", "1", "2"]).status.code(), Some(1));
}
