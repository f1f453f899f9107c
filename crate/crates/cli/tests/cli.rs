use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use approx::assert_relative_eq;
use serde_json::Value;
use tempfile::TempDir;

const SQRT2: f64 = std::f64::consts::SQRT_2;

fn metgeo(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_metgeo"))
        .args(args)
        .env_remove("METGEO_THREADS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn json(o: &Output) -> Value {
    assert!(o.status.success(), "stderr: {}", stderr(o));
    serde_json::from_slice(&o.stdout).expect("valid JSON on stdout")
}

fn write(dir: &TempDir, name: &str, contents: &str) -> PathBuf {
    let path = dir.path().join(name);
    std::fs::write(&path, contents).unwrap();
    path
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// `exp(diag(10, -10))`, the far end of the cone worked example.
const FAR: &str = "[22026.465794806718, 0, 0, 4.5399929762484854e-05]";

fn conformal_file(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "conformal.json",
        &format!(
            r#"{{"dim": 2, "grid": [{{"id": "x", "weight": 1.0}}],
                "fields": {{
                    "g0": {{"x": {{"spd": [1, 0, 0, 1]}}}},
                    "g1": {{"x": {{"spd": [4, 0, 0, 4]}}}},
                    "e": {{"x": {{"spd": [2.718281828459045, 0, 0, 2.718281828459045]}}}},
                    "far": {{"x": {{"spd": {FAR}}}}},
                    "zero": {{"x": {{"cone": true}}}}
                }}}}"#
        ),
    )
}

fn two_sample_file(dir: &TempDir) -> PathBuf {
    write(
        dir,
        "two.json",
        &format!(
            r#"{{"dim": 2, "grid": [{{"id": "a", "weight": 0.75}}, {{"id": "b", "weight": 0.25}}],
                "fields": {{
                    "g0": {{"a": {{"spd": [1, 0, 0, 1]}}, "b": {{"spd": [1, 0, 0, 1]}}}},
                    "g1": {{"a": {{"spd": [1, 0, 0, 1]}}, "b": {{"spd": {FAR}}}}}
                }}}}"#
        ),
    )
}

#[test]
fn dist_examples() {
    let dir = TempDir::new().unwrap();
    let conformal = conformal_file(&dir);
    let r = json(&metgeo(&["dist", s(&conformal), "g0", "g1", "--format", "json"]));
    assert_relative_eq!(r["distance"].as_f64().unwrap(), 2.0 * SQRT2, max_relative = 1e-12);
    assert_eq!(r["samples"][0]["case"], "riemannian");

    let r = json(&metgeo(&["dist", s(&conformal), "g1", "g1", "--format", "json"]));
    assert_eq!(r["distance"].as_f64().unwrap(), 0.0);

    let two = two_sample_file(&dir);
    let r = json(&metgeo(&["dist", s(&two), "g0", "g1", "--format", "json"]));
    assert_relative_eq!(r["distance"].as_f64().unwrap(), 2.0 * SQRT2, max_relative = 1e-12);
    assert_relative_eq!(r["samples"][1]["distance"].as_f64().unwrap(), 4.0 * SQRT2, max_relative = 1e-12);
    assert_eq!(r["samples"][1]["case"], "cone_concatenation");

    let human = metgeo(&["dist", s(&two), "g0", "g1"]);
    assert!(human.status.success());
    assert!(stdout(&human).contains("2.82843"), "{}", stdout(&human));
}

#[test]
fn dist_csv_and_out_file() {
    let dir = TempDir::new().unwrap();
    let two = two_sample_file(&dir);
    let o = metgeo(&["dist", s(&two), "g0", "g1", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("sample_id,weight,distance,case"));
    let row: Vec<&str> = lines.nth(1).unwrap().split(',').collect();
    assert_eq!(row[0], "b");
    assert_relative_eq!(row[2].parse::<f64>().unwrap(), 4.0 * SQRT2, max_relative = 1e-12);

    let out = dir.path().join("report.json");
    let o = metgeo(&["dist", s(&two), "g0", "g1", "--out", s(&out)]);
    assert!(o.status.success());
    assert!(stdout(&o).starts_with("d(g0, g1)"));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert_relative_eq!(r["distance"].as_f64().unwrap(), 2.0 * SQRT2, max_relative = 1e-12);
}

#[test]
fn input_errors_exit_2() {
    let dir = TempDir::new().unwrap();
    let conformal = conformal_file(&dir);
    let o = metgeo(&["dist", s(&conformal), "g0", "missing"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("missing"));

    let o = metgeo(&["dist", s(&dir.path().join("absent.json")), "g0", "g1"]);
    assert_eq!(o.status.code(), Some(2));

    let garbage = write(&dir, "garbage.json", "{ not json");
    assert_eq!(metgeo(&["dist", s(&garbage), "g0", "g1"]).status.code(), Some(2));

    let o = metgeo(&["geodesic", s(&conformal), "g0", "g1", "--t-samples", "1"]);
    assert_eq!(o.status.code(), Some(2));

    let o = Command::new(env!("CARGO_BIN_EXE_metgeo"))
        .args(["dist", s(&conformal), "g0", "g1"])
        .env("METGEO_THREADS", "zero")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn weights_must_sum_to_one_unless_normalized() {
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "unnormalized.json",
        r#"{"dim": 2, "grid": [{"id": "a", "weight": 3}, {"id": "b", "weight": 1}],
            "fields": {"g0": {"a": {"spd": [1, 0, 0, 1]}, "b": {"spd": [1, 0, 0, 1]}},
                       "g1": {"a": {"spd": [4, 0, 0, 4]}, "b": {"spd": [4, 0, 0, 4]}}}}"#,
    );
    assert_eq!(metgeo(&["dist", s(&file), "g0", "g1"]).status.code(), Some(2));
    let r = json(&metgeo(&["dist", s(&file), "g0", "g1", "--normalize-weights", "--format", "json"]));
    assert_relative_eq!(r["distance"].as_f64().unwrap(), 2.0 * SQRT2, max_relative = 1e-12);
    assert_relative_eq!(r["samples"][0]["weight"].as_f64().unwrap(), 0.75);
}

#[test]
fn asymmetric_input_warns_and_reference_whitens() {
    let dir = TempDir::new().unwrap();
    let file = write(
        &dir,
        "frame.json",
        r#"{"dim": 2, "grid": [{"id": "x", "weight": 1, "reference": [2, 1, 1, 2]}],
            "fields": {"g0": {"x": {"spd": [2, 1, 1, 2]}},
                       "g1": {"x": {"spd": [8, 4.000001, 4, 8]}}}}"#,
    );
    let o = metgeo(&["dist", s(&file), "g0", "g1", "--format", "json"]);
    assert!(stderr(&o).contains("symmetrized"), "{}", stderr(&o));
    let r = json(&o);
    // whitened against the reference, the pair is I and ~4I
    assert_relative_eq!(r["distance"].as_f64().unwrap(), 2.0 * SQRT2, max_relative = 1e-5);
}

#[test]
fn geodesic_endpoints_and_tags() {
    let dir = TempDir::new().unwrap();
    let conformal = conformal_file(&dir);
    let r = json(&metgeo(&["geodesic", s(&conformal), "g0", "g1", "--t-samples", "2"]));
    let fields = r["fields"].as_object().unwrap();
    assert_eq!(fields.len(), 2);
    assert_eq!(fields["t_0"]["x"]["spd"], serde_json::json!([1.0, 0.0, 0.0, 1.0]));
    assert_eq!(fields["t_1"]["x"]["spd"], serde_json::json!([4.0, 0.0, 0.0, 4.0]));

    let o = metgeo(&["geodesic", s(&conformal), "g0", "g1", "--t-samples", "9", "--format", "csv"]);
    assert!(o.status.success());
    let text = stdout(&o);
    let rows: Vec<&str> = text.lines().skip(1).collect();
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r.ends_with(",riemannian")));
}

#[test]
fn cone_geodesic_reaches_zero_volume() {
    let dir = TempDir::new().unwrap();
    let conformal = conformal_file(&dir);
    let out = dir.path().join("geo.json");
    let o = metgeo(&["geodesic", s(&conformal), "g0", "far", "--t-samples", "21", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let table = std::fs::read_to_string(dir.path().join("geo.csv")).unwrap();
    let rows: Vec<(f64, f64)> = table
        .lines()
        .skip(1)
        .map(|l| {
            let c: Vec<&str> = l.split(',').collect();
            assert_eq!(c[3], "cone_concatenation");
            (c[0].parse().unwrap(), c[2].parse().unwrap())
        })
        .collect();
    // both endpoints have unit volume, so the switch happens at t* = 1/2
    let (t_min, v_min) = rows.iter().copied().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap();
    assert_eq!(t_min, 0.5);
    assert_eq!(v_min, 0.0);

    // the emitted file is itself a valid field file
    let again = metgeo(&["dist", s(&out), "t_00", "t_20", "--format", "json"]);
    assert_relative_eq!(json(&again)["distance"].as_f64().unwrap(), 4.0 * SQRT2, max_relative = 1e-12);
    let mid = json(&metgeo(&["dist", s(&out), "t_10", "t_10", "--format", "json"]));
    assert_eq!(mid["distance"].as_f64().unwrap(), 0.0);
}

#[test]
fn explog_examples() {
    let dir = TempDir::new().unwrap();
    let conformal = conformal_file(&dir);
    let r = json(&metgeo(&["explog", s(&conformal), "g1", "g1", "--format", "json"]));
    assert!(r["samples"][0]["tangent"].as_array().unwrap().iter().all(|x| x.as_f64() == Some(0.0)));

    let r = json(&metgeo(&["explog", s(&conformal), "g0", "e", "--verify", "--format", "json"]));
    let psi: Vec<f64> = r["samples"][0]["tangent"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_f64().unwrap())
        .collect();
    let expected = 2.0 * (0.5f64.exp() - 1.0);
    assert_relative_eq!(psi[0], expected, max_relative = 1e-12);
    assert_relative_eq!(psi[3], expected, max_relative = 1e-12);
    assert_relative_eq!(expected, 1.29744, max_relative = 1e-5);
    assert!(r["max_reconstruction_error"].as_f64().unwrap() <= 1e-8);
    assert!(r["max_norm_error"].as_f64().unwrap() <= 1e-10);
}

#[test]
fn explog_domain_errors_exit_3_and_list_ids() {
    let dir = TempDir::new().unwrap();
    let two = two_sample_file(&dir);
    let o = metgeo(&["explog", s(&two), "g0", "g1"]);
    assert_eq!(o.status.code(), Some(3));
    let msg = stderr(&o);
    assert!(msg.contains(": b"), "{msg}");
    assert!(!msg.contains(" a"), "{msg}");

    let conformal = conformal_file(&dir);
    assert_eq!(metgeo(&["explog", s(&conformal), "zero", "g0"]).status.code(), Some(3));
}

#[test]
fn check_bounds_and_speed_pass() {
    let o = metgeo(&["check", "bounds", "--trials", "500", "--seed", "7", "--format", "json"]);
    let r = json(&o);
    assert_eq!(r["pass"], true);
    assert_eq!(r["mode"], "bounds");
    assert_eq!(r["report"]["violations"], 0);

    let o = metgeo(&["check", "speed", "--trials", "40", "--seed", "7"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("PASS speed"));
}

#[test]
fn check_cat0_with_cone_writes_report() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("cat0.json");
    let o = metgeo(&["check", "cat0", "--trials", "200", "--seed", "7", "--include-cone", "--out", s(&out)]);
    assert!(o.status.success(), "{}", stderr(&o));
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    assert!(r["report"]["max_violation"].as_f64().unwrap() <= 1e-9);
    assert_eq!(r["report"]["seed"], 7);
}

#[test]
fn failed_verification_exits_1() {
    let dir = TempDir::new().unwrap();
    let conformal = conformal_file(&dir);
    // the round trip through exp is accurate to rounding, not exact
    let o = metgeo(&["explog", s(&conformal), "g0", "e", "--verify", "--tolerance", "0"]);
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    assert!(stderr(&o).contains("reconstruction error"));
}

#[test]
fn check_oracle_on_a_pairs_file() {
    let dir = TempDir::new().unwrap();
    let pairs = write(
        &dir,
        "pairs.json",
        r#"[{"dim": 2, "a0": [1, 0, 0, 1], "a1": [4, 0, 0, 4]}, {"dim": 2, "a0": [1, 0, 0, 1], "a1": null}]"#,
    );
    let o = metgeo(&["check", "oracle", "--pairs", s(&pairs), "--format", "json"]);
    let r = json(&o);
    assert_eq!(r["pass"], true);
    assert_eq!(r["report"]["pairs"], 2);
    assert!(r["report"]["max_relative_error"].as_f64().unwrap() <= 0.03);
}

#[test]
fn check_rejects_csv() {
    assert_eq!(metgeo(&["check", "bounds", "--trials", "10", "--format", "csv"]).status.code(), Some(2));
}
