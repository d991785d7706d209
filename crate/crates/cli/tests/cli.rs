use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use lindode::numkernel::ComplexMatrix;
use lindode::odecore::{OdeProblem, TimeDependentMatrix};
use lindode::suite::{constant_suite, knot_suite};
use lindode::C64;
use lindode_cli::problem::Problem;
use serde_json::Value;

fn fixture(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

fn lindode(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lindode"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_json(args: &[&str]) -> (i32, Value) {
    let out = lindode(args);
    let code = out.status.code().expect("exit code");
    let text = String::from_utf8(out.stdout).unwrap();
    let value = serde_json::from_str(&text).unwrap_or_else(|e| panic!("{e}: {text}"));
    (code, value)
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn value(report: &Value, key: &str) -> f64 {
    report["results"][key]["value"].as_f64().unwrap_or_else(|| panic!("{key} missing"))
}

#[test]
fn solve_matches_closed_form() {
    let f = fixture("diag.json");
    let (code, r) = run_json(&["solve", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["status"], "ok");
    let (a, b) = (0.6 * (-0.5f64).exp(), 0.8 * (-1.0f64).exp());
    let eta = a.hypot(b);
    assert!((value(&r, "eta") - eta).abs() < 1e-9);
    let mu = r["results"]["mu_t"]["value"].as_array().unwrap();
    assert!((mu[0][0].as_f64().unwrap() - a / eta).abs() < 1e-9);
    assert!((mu[1][0].as_f64().unwrap() - b / eta).abs() < 1e-9);
    assert!(mu.iter().all(|z| z[1].as_f64().unwrap().abs() < 1e-12));
}

fn untoleranced(v: &Value, path: &str, out: &mut Vec<String>) {
    match v {
        Value::Object(o) if o.contains_key("value") => {
            if !o.contains_key("tolerance") {
                out.push(path.to_string());
            }
        }
        Value::Object(o) => o.iter().for_each(|(k, x)| untoleranced(x, &format!("{path}.{k}"), out)),
        Value::Array(a) => a.iter().enumerate().for_each(|(i, x)| untoleranced(x, &format!("{path}[{i}]"), out)),
        Value::Number(_) => out.push(path.to_string()),
        _ => {}
    }
}

#[test]
fn every_result_carries_a_tolerance() {
    let diag = fixture("diag.json");
    let mixed = fixture("mixed.json");
    let runs: Vec<Vec<&str>> = vec![
        vec!["solve", diag.to_str().unwrap()],
        vec!["solve", "--model", "direct", diag.to_str().unwrap()],
        vec!["echo", mixed.to_str().unwrap(), "--shots", "100"],
        vec!["extract", mixed.to_str().unwrap()],
        vec!["poly", "--delta", "0.5", "--eps", "1e-3"],
        vec!["budget"],
        vec!["sweep"],
    ];
    for args in runs {
        let (_, r) = run_json(&args);
        let mut bare = Vec::new();
        untoleranced(&r["results"], "results", &mut bare);
        assert!(bare.is_empty(), "{args:?}: {bare:?}");
    }
}

#[test]
fn non_semi_dissipative_is_input_error() {
    let f = fixture("not_semi_dissipative.json");
    let out = lindode(&["solve", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("eigenvalue -1.000000e0"), "{}", stderr(&out));
}

#[test]
fn direct_model_without_gap_is_input_error() {
    let f = fixture("gap_undefined.json");
    let out = lindode(&["solve", "--model", "direct", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("Δ undefined"), "{}", stderr(&out));
}

#[test]
fn direct_model_meets_target() {
    let f = fixture("diag.json");
    let (code, r) = run_json(&["solve", "--model", "direct", "--eps", "1e-4", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(value(&r, "error") <= 1e-4);
    assert!(value(&r, "degree") >= 1.0);
}

#[test]
fn unreachable_tolerance_is_assertion_failure_with_report() {
    let f = fixture("source.json");
    let out = lindode(&["solve", "--inhomogeneous-slices", "2", "--eps", "1e-9", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let r: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(r["status"], "assertion_failed");
    assert_eq!(r["assertions"][0]["pass"], false);
}

#[test]
fn inhomogeneous_solve_converges() {
    let f = fixture("source.json");
    let (code, r) = run_json(&["solve", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!(value(&r, "error") <= 1e-3);
}

#[test]
fn gibbs_partition_function() {
    let f = fixture("gibbs.json");
    let (code, r) = run_json(&["gibbs", f.to_str().unwrap()]);
    assert_eq!(code, 0);
    let z = 1.0 + (-1.0f64).exp();
    assert!((value(&r, "Z") - z).abs() <= 1e-6 * z);
}

#[test]
fn poly_certifies() {
    let (code, r) = run_json(&["poly", "--delta", "0.25", "--eps", "1e-4"]);
    assert_eq!(code, 0);
    assert!(value(&r, "certified_error") <= 1e-4);
    let degree = value(&r, "degree");
    assert!(degree >= 1.0 && degree % 2.0 == 1.0);
    assert!(r["assertions"].as_array().unwrap().iter().all(|a| a["pass"] == true));
}

#[test]
fn budget_has_nine_named_rows() {
    let (code, r) = run_json(&["budget"]);
    assert_eq!(code, 0);
    let rows = r["results"]["table"].as_array().unwrap();
    let names: Vec<&str> = rows.iter().map(|x| x["method"].as_str().unwrap()).collect();
    assert_eq!(names, lindode::budget::COMPARISON_METHODS);
}

#[test]
fn estimators_agree_with_reference() {
    let f = fixture("mixed.json");
    for cmd in ["echo", "expval", "extract"] {
        let (code, r) = run_json(&[cmd, f.to_str().unwrap()]);
        assert_eq!(code, 0, "{cmd}: {r}");
    }
}

#[test]
fn expval_without_observable_is_input_error() {
    let f = fixture("diag.json");
    assert_eq!(lindode(&["expval", f.to_str().unwrap()]).status.code(), Some(1));
}

#[test]
fn same_seed_gives_identical_bytes() {
    let f = fixture("gibbs.json");
    let args = ["gibbs", f.to_str().unwrap(), "--shots", "500", "--seed", "7"];
    let a = lindode(&args);
    let b = lindode(&args);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(a.stdout, b.stdout);
    let c = lindode(&["gibbs", f.to_str().unwrap(), "--shots", "500", "--seed", "8"]);
    assert_ne!(a.stdout, c.stdout);
}

#[test]
fn csv_trajectory_columns() {
    let f = fixture("diag.json");
    let out = lindode(&["solve", "--format", "csv", "--samples", "5", f.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "t,re0,im0,re1,im1,eta");
    assert_eq!(lines.len(), 6);
    let last: Vec<f64> = lines[5].split(',').map(|x| x.parse().unwrap()).collect();
    assert_eq!(last[0], 0.5);
    let eta = (0.6 * (-0.5f64).exp()).hypot(0.8 * (-1.0f64).exp());
    assert!((last[5] - eta).abs() < 1e-9);
}

#[test]
fn out_flag_writes_file_and_trajectory() {
    let dir = tempfile::tempdir().unwrap();
    let report = dir.path().join("r.json");
    let traj = dir.path().join("t.csv");
    let f = fixture("diag.json");
    let out = lindode(&[
        "solve",
        f.to_str().unwrap(),
        "--out",
        report.to_str().unwrap(),
        "--trajectory",
        traj.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert!(out.stdout.is_empty());
    let r: Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(r["command"], "solve");
    assert!(std::fs::read_to_string(&traj).unwrap().starts_with("t,re0"));
    assert_eq!(std::fs::read_dir(dir.path()).unwrap().count(), 2);
}

#[test]
fn syntax_error_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"n\": 1,\n  \"V\": {\"constant\": [[[1, 0]]]\n  \"T\": 1\n}\n").unwrap();
    let out = lindode(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 4"), "{}", stderr(&out));
}

#[test]
fn dimension_error_names_line() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let src = std::fs::read_to_string(fixture("diag.json")).unwrap().replace("[[0.6, 0], [0.8, 0]]", "[[1, 0]]");
    std::fs::write(&path, src).unwrap();
    let out = lindode(&["solve", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(stderr(&out).contains("line 4: mu0 has length 1"), "{}", stderr(&out));
}

fn collect_bits(v: &Value, out: &mut Vec<u64>) {
    match v {
        Value::Number(n) => out.push(n.as_f64().unwrap().to_bits()),
        Value::Array(a) => a.iter().for_each(|x| collect_bits(x, out)),
        Value::Object(o) => o.values().for_each(|x| collect_bits(x, out)),
        _ => {}
    }
}

fn assert_bitwise(a: &Problem, b: &Problem) {
    let (fa, fb) = (a.to_file().unwrap(), b.to_file().unwrap());
    let bits = |p: &lindode_cli::problem::ProblemFile| {
        let mut out = Vec::new();
        collect_bits(&serde_json::to_value(p).unwrap(), &mut out);
        out
    };
    assert_eq!(fa, fb);
    assert_eq!(bits(&fa), bits(&fb));
}

#[test]
fn problem_files_round_trip_bitwise() {
    let mut problems: Vec<OdeProblem> = constant_suite(11, 6);
    problems.extend(knot_suite(12, 3));
    for ode in problems {
        let original = Problem::from_ode(ode.clone());
        let text = original.to_json().unwrap();
        let parsed = Problem::load(&text).unwrap();
        assert_bitwise(&original, &parsed);
        for (x, y) in ode.mu0.iter().zip(&parsed.ode.mu0) {
            assert_eq!(x.re.to_bits(), y.re.to_bits());
            assert_eq!(x.im.to_bits(), y.im.to_bits());
        }
        let (va, vb) = (ode.v.at(0.37), parsed.ode.v.at(0.37));
        assert!(va.as_slice().iter().zip(vb.as_slice()).all(|(x, y)| x == y));
    }
}

#[test]
fn optional_fields_round_trip() {
    let v = ComplexMatrix::from_real_diag(&[0.1, 0.7]);
    let ode = OdeProblem::new(
        1,
        TimeDependentMatrix::Constant(v),
        vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)],
        Some(TimeDependentMatrix::Constant(ComplexMatrix::column(&[C64::new(1.0 / 3.0, 0.0), C64::new(0.0, 0.1)]))),
        std::f64::consts::PI,
    )
    .unwrap();
    let mut p = Problem::from_ode(ode);
    p.phi0 = Some(vec![C64::new(1.0, 0.0), C64::new(0.0, 0.0)]);
    p.observable = Some(ComplexMatrix::from_real_diag(&[1.0 / 7.0, -1.0]));
    p.beta = Some(0.1 + 0.2);
    p.delta_override = Some(1e-300);
    let again = Problem::load(&p.to_json().unwrap()).unwrap();
    assert_bitwise(&p, &again);
    assert_eq!(again.beta.unwrap().to_bits(), (0.1f64 + 0.2).to_bits());
}

#[test]
fn sweep_csv_lists_axes() {
    let out = lindode(&["sweep", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.starts_with("axis,x,y,fitted_exponent,predicted_exponent\n"));
    assert!(text.lines().count() > 10);
}

#[test]
fn csv_is_refused_where_undefined() {
    let f = fixture("gibbs.json");
    assert_eq!(lindode(&["gibbs", f.to_str().unwrap(), "--format", "csv"]).status.code(), Some(1));
}
