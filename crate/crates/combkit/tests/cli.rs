//! End-to-end tests of the `combkit` binary: goldens, exit codes,
//! reproducibility and report schemas.

use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

const BTREES: &str = "B = z + (z*B*B)";

fn combkit(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_combkit")).args(args).env_remove("COMBKIT_PRECISION").output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn json(args: &[&str]) -> Value {
    let mut all = args.to_vec();
    all.extend(["--format", "json"]);
    let o = combkit(&all);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    serde_json::from_slice(&o.stdout).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    if let Value::Object(m) = &mut v {
        m.remove("timing");
        if let Some(s) = m.get_mut("sample") {
            *s = without_timing(s.take());
        }
    }
    v
}

fn schema(name: &str) -> jsonschema::Validator {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("schemas").join(format!("{name}.schema.json"));
    let s: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    jsonschema::validator_for(&s).unwrap()
}

fn assert_valid(name: &str, v: &Value) {
    let validator = schema(name);
    let errors: Vec<String> = validator.iter_errors(v).map(|e| format!("{e} at {}", e.instance_path())).collect();
    assert!(errors.is_empty(), "{name}: {errors:?}\n{v:#}");
}

fn temp(name: &str) -> PathBuf {
    let dir = PathBuf::from(env!("CARGO_TARGET_TMPDIR"));
    dir.join(format!("{}-{name}", std::process::id()))
}

#[test]
fn count_golden() {
    let o = combkit(&["count", "--spec", BTREES, "--terms", "20"]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "[0, 1, 0, 1, 0, 2, 0, 5, 0, 14, 0, 42, 0, 132, 0, 429, 0, 1430, 0, 4862, 0]\n");
    let v = json(&["count", "-s", BTREES, "--terms", "20"]);
    assert_eq!(v["coefficients"][19], "4862");
    assert_valid("count", &v);
}

#[test]
fn multivariate_count_lists_monomials() {
    let v = json(&["count", "-s", "M = C * Seq(C); C = z + u", "--terms", "2"]);
    let table = v["table"].as_array().unwrap();
    let find = |e: [u64; 2]| table.iter().find(|c| c["exponents"] == serde_json::json!(e)).map(|c| c["value"].clone());
    assert_eq!(find([1, 0]), Some("1".into()));
    assert_eq!(find([1, 1]), Some("2".into()));
    assert_eq!(find([2, 0]), Some("1".into()));
    assert_valid("count", &v);
}

#[test]
fn sample_smoke() {
    let o = combkit(&["sample", "--spec", BTREES, "--point", "z=0.2", "-n", "1", "--seed", "5"]);
    assert_eq!(o.status.code(), Some(0));
    let text = stdout(&o);
    assert!(text.contains("seed 5"));
    assert_eq!(text.lines().filter(|l| l.contains("size [")).count(), 1);
    let v = json(&["sample", "--spec", BTREES, "--point", "z=0.2", "-n", "3", "--seed", "5"]);
    assert_eq!(v["samples"].as_array().unwrap().len(), 3);
    assert_valid("sample", &v);
    let t = json(&["sample", "--spec", BTREES, "--point", "z=0.4", "-n", "3", "--seed", "5", "--tree"]);
    assert_valid("sample", &t);
    assert!(t["samples"][0]["object"].is_object());
}

#[test]
fn tune_and_sample_within_tolerance() {
    let v = json(&["tune", "--spec", BTREES, "--target", "z=1000", "--tolerance", "0.05", "--sample", "5", "--seed", "17"]);
    assert_valid("tune", &v);
    let samples = v["sample"]["samples"].as_array().unwrap();
    assert_eq!(samples.len(), 5);
    for s in samples {
        let n = s["size"][0].as_u64().unwrap();
        assert!((950..=1050).contains(&n), "{n}");
    }
    let lo: f64 = v["expected"][0]["lo"].as_str().unwrap().parse().unwrap();
    assert!((lo - 1000.0).abs() < 5.0);
}

#[test]
fn seeds_reproduce_reports() {
    let args = ["sample", "-s", BTREES, "--point", "z=0.45", "--sizes", "10..30", "-n", "20", "--seed", "123"];
    let a = without_timing(json(&args));
    let b = without_timing(json(&args));
    assert_eq!(a, b);
    let single = Command::new(env!("CARGO_BIN_EXE_combkit"))
        .args(args)
        .args(["--format", "json"])
        .env("RAYON_NUM_THREADS", "3")
        .output()
        .unwrap();
    assert_eq!(without_timing(serde_json::from_slice(&single.stdout).unwrap()), a);
}

#[test]
fn seed_is_echoed_when_drawn() {
    let v = json(&["sample", "-s", BTREES, "--point", "z=0.2"]);
    assert!(v["seed"].is_u64());
}

#[test]
fn precision_comes_from_the_environment() {
    let o = Command::new(env!("CARGO_BIN_EXE_combkit"))
        .args(["sample", "-s", "B = z + (B*B)", "--point", "z=0.2", "-n", "200", "--seed", "1", "--format", "json"])
        .env("COMBKIT_PRECISION", "8")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["precision"], 8);
    assert!(v["counters"]["escalations"].as_u64().unwrap() > 0);
}

#[test]
fn traces_replay_to_the_same_objects() {
    let path = temp("traces.json");
    let p = path.to_str().unwrap();
    let v = json(&["sample", "-s", "T = z * Seq(T)", "--point", "z=0.24", "-n", "5", "--seed", "8", "--traces", p, "--precision", "8"]);
    let file: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    for t in file.as_array().unwrap() {
        assert_valid("trace", t);
    }
    let r = json(&["replay", "-s", "T = z * Seq(T)", "--traces", p]);
    assert_valid("replay", &r);
    assert_eq!(r["verified"], 5);
    assert_eq!(r["samples"], v["samples"]);
    let other = combkit(&["replay", "-s", "B = z + (z*B*B)", "--traces", p]);
    assert_eq!(other.status.code(), Some(1));
}

#[test]
fn validate_reports_bounds_and_diagnostics() {
    let v = json(&["validate", "-s", "B = z + (z*B*B); L = z*z*z"]);
    assert_valid("validate", &v);
    assert_eq!(v["valid"], true);
    assert_eq!(v["classes"][1]["min_size"][0], 3);
    assert_eq!(v["classes"][1]["max_size"][0], 3);
    assert!(v["classes"][0]["max_size"][0].is_null());
    let o = combkit(&["validate", "-s", "A = A * z", "--format", "json"]);
    assert_eq!(o.status.code(), Some(2));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_valid("validate", &v);
    assert_eq!(v["diagnostics"][0]["code"], "EmptyClass");
}

#[test]
fn oracle_report() {
    let v = json(&["oracle-eval", "-s", BTREES, "--point", "z=0.2"]);
    assert_valid("oracle", &v);
    let lo: f64 = v["classes"][0]["lo"].as_str().unwrap().parse().unwrap();
    assert!((lo - 0.208_712_152_522_08).abs() < 1e-14);
    let alias = combkit(&["oracle", "-s", BTREES, "--point", "z=0.2"]);
    assert_eq!(alias.status.code(), Some(0));
}

#[test]
fn spec_files_allow_comments() {
    let path = temp("trees.spec");
    std::fs::write(&path, "# general trees\nT = z * Seq(T)  # one root\n\n").unwrap();
    let o = combkit(&["count", "-f", path.to_str().unwrap(), "--terms", "6"]);
    assert_eq!(stdout(&o), "[0, 1, 1, 2, 5, 14, 42]\n");
}

fn exit_code(args: &[&str]) -> (i32, String) {
    let o = combkit(args);
    (o.status.code().unwrap(), String::from_utf8(o.stderr).unwrap())
}

#[test]
fn exit_codes() {
    assert_eq!(exit_code(&["--help"]).0, 0);
    assert_eq!(exit_code(&["--version"]).0, 0);
    assert_eq!(exit_code(&["count"]).0, 1);
    assert_eq!(exit_code(&["count", "-s", BTREES, "-f", "x"]).0, 1);
    assert_eq!(exit_code(&["frobnicate"]).0, 1);
    assert_eq!(exit_code(&["sample", "-s", BTREES, "--point", "z"]).0, 1);
    assert_eq!(exit_code(&["sample", "-s", BTREES, "--point", "q=0.1"]).0, 1);
    assert_eq!(exit_code(&["sample", "-s", BTREES]).0, 1);
    assert_eq!(exit_code(&["count", "-s", BTREES, "--class", "Q"]).0, 1);
    assert_eq!(exit_code(&["count", "-s", "B = (z"]).0, 2);
    assert_eq!(exit_code(&["count", "-s", "A = Q"]).0, 2);
    assert_eq!(exit_code(&["count", "-f", "/nonexistent/spec"]).0, 2);
    assert_eq!(exit_code(&["sample", "-s", BTREES, "--point", "z=0.6"]).0, 3);
    assert_eq!(exit_code(&["sample", "-s", BTREES, "--point", "z=0.2", "--sizes", "4..4"]).0, 3);
    assert_eq!(exit_code(&["uniformity", "-s", BTREES, "--sizes", "1..3"]).0, 1);
}

#[test]
fn errors_are_structured() {
    let o = combkit(&["count", "-s", "B = (z", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_valid("error", &v);
    assert_eq!(v["exit_code"], 2);
    assert_eq!(v["diagnostics"][0]["code"], "Syntax");
    assert_eq!(v["diagnostics"][0]["position"], "1:7");
    let o = combkit(&["sample", "-s", BTREES, "--point", "z=0.6", "--format", "json"]);
    let v: Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_valid("error", &v);
    assert_eq!(v["diagnostics"][0]["code"], "Divergent");
    let (_, text) = exit_code(&["count", "-s", "A = Q"]);
    assert!(text.contains("UnresolvedReference"), "{text}");
}

#[test]
fn uniformity_report() {
    let v = json(&["uniformity", "-s", "B = z + (B*B)", "--sizes", "3..5", "--samples", "500", "--seed", "2"]);
    assert_valid("uniformity", &v);
    let structures: Vec<&str> = v["rows"].as_array().unwrap().iter().map(|r| r["structures"].as_str().unwrap()).collect();
    assert_eq!(structures, ["2", "5", "14"]);
    let again = json(&["uniformity", "-s", "B = z + (B*B)", "--sizes", "3..5", "--samples", "500", "--seed", "2"]);
    assert_eq!(without_timing(v), without_timing(again));
}

#[test]
fn bench_report() {
    let v = json(&["bench-rejection", "-s", BTREES, "--point", "z=0.48", "--sizes", "40..60", "--samples", "2000", "--blocks", "4", "--seed", "1"]);
    assert_valid("bench", &v);
    assert_eq!(v["mismatches"], 0);
    assert_eq!(v["attempts"], 2000);
    let open = json(&["bench-rejection", "-s", BTREES, "--point", "z=0.48", "--sizes", "1..", "--samples", "1000", "--seed", "1"]);
    assert_eq!(open["early_aborts"], 0);
}
