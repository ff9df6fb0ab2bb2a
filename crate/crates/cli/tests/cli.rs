use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_hypersurf"))
}

fn scenario(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../scenarios").join(name)
}

fn run(args: &[&str], out: &Path) -> Output {
    bin().arg("--out").arg(out).args(args).output().expect("binary runs")
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn without_timing(mut v: Value) -> Value {
    v["meta"].as_object_mut().unwrap().remove("timing");
    v
}

#[test]
fn rotation_scenario_is_conformally_flat() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", scenario("rotation_conformal.json").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("rotation_report.json"));
    for key in ["scenario", "points", "aggregates", "verdicts", "diagnostics", "meta"] {
        assert!(r.get(key).is_some(), "missing {key}");
    }
    let v = &r["verdicts"]["conformally_flat"];
    assert_eq!(v["status"], "pass");
    assert!(v["value"].as_f64().unwrap() < 1e-6);
    assert_eq!(r["points"].as_array().unwrap().len(), 20);
    assert_eq!(r["meta"]["rng"], "ChaCha8Rng");
    assert_eq!(r["meta"]["seed"], 7);
    let csv = fs::read_to_string(dir.path().join("rotation_points.csv")).unwrap();
    assert_eq!(csv.lines().count(), 21);
    assert!(csv.starts_with("sample,u0,u1,u2,u3,"));
}

#[test]
fn slice_radial_check_is_degenerate_and_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", scenario("slice_radial.json").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = read_json(&dir.path().join("slice_report.json"));
    let v = &r["verdicts"]["radially_flat"];
    assert_eq!(v["status"], "pass");
    assert_eq!(v["flags"][0], "degenerate");
    assert!(v["detail"].as_str().unwrap().contains("T = 0"));
}

#[test]
fn generic_tojeiro_chart_is_not_semi_parallel() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["analyze", scenario("tojeiro_semi_parallel.json").to_str().unwrap()], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = read_json(&dir.path().join("tojeiro_report.json"));
    assert_eq!(r["verdicts"]["semi_parallel"]["status"], "fail");
    assert_eq!(r["verdicts"]["gauss"]["status"], "pass");
    assert_eq!(r["meta"]["overall"], "fail");
}

#[test]
fn malformed_scenarios_exit_with_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let cases = [
        ("{ \"space\": { \"epsilon\": 1, \"n\": 4 },\n  \"bogus\": 1 }", "bogus"),
        (
            r#"{"space":{"epsilon":2,"n":4},"chart":{"kind":"slice","t0":0},"sampling":{"mode":"grid","per_dim":2},"checks":["gauss"]}"#,
            "epsilon",
        ),
        (
            r#"{"space":{"epsilon":1,"n":3},"chart":{"kind":"slice","t0":0},"sampling":{"mode":"grid","per_dim":2},"checks":["conformally_flat"]}"#,
            "n >= 4",
        ),
        (
            r#"{"space":{"epsilon":1,"n":3},"chart":{"kind":"slice","t0":0},"sampling":{"mode":"random","count":3},"checks":["gauss"]}"#,
            "seed",
        ),
        (
            r#"{"space":{"epsilon":1,"n":3},"chart":{"kind":"slice","t0":0},"sampling":{"mode":"grid","per_dim":2},"checks":["gauss"],"tolerances":{"nope":1e-3}}"#,
            "nope",
        ),
    ];
    for (i, (text, needle)) in cases.iter().enumerate() {
        let path = dir.path().join(format!("bad{i}.json"));
        fs::write(&path, text).unwrap();
        let out = run(&["analyze", path.to_str().unwrap()], dir.path());
        let err = String::from_utf8_lossy(&out.stderr);
        assert_eq!(out.status.code(), Some(2), "case {i}: {err}");
        assert!(err.contains(needle), "case {i}: {err}");
    }
    let first = String::from_utf8_lossy(&run(&["analyze", dir.path().join("bad0.json").to_str().unwrap()], dir.path()).stderr).to_string();
    assert!(first.contains("line 2"), "{first}");
    let missing = run(&["analyze", "/nonexistent/scenario.json"], dir.path());
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn seed_flag_and_tolerance_overrides_are_applied() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(
        &["--seed", "11", "--tol-override", "weyl=1e-30", "analyze", scenario("rotation_conformal.json").to_str().unwrap()],
        dir.path(),
    );
    let r = read_json(&dir.path().join("rotation_report.json"));
    assert_eq!(r["meta"]["seed"], 11);
    // the check's own override still wins for conformally_flat
    assert_eq!(r["verdicts"]["conformally_flat"]["tolerance"], 1e-6);
    assert_eq!(r["meta"]["tolerances"]["weyl"], 1e-30);
    assert_eq!(out.status.code(), Some(0));
    let bad = run(&["--tol-override", "weyl", "analyze", scenario("rotation_conformal.json").to_str().unwrap()], dir.path());
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn reports_are_deterministic_across_runs_and_thread_counts() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let path = scenario("rotation_conformal.json");
    run(&["--threads", "1", "analyze", path.to_str().unwrap()], a.path());
    run(&["--threads", "3", "analyze", path.to_str().unwrap()], b.path());
    let ra = without_timing(read_json(&a.path().join("rotation_report.json")));
    let rb = without_timing(read_json(&b.path().join("rotation_report.json")));
    assert_eq!(serde_json::to_string(&ra).unwrap(), serde_json::to_string(&rb).unwrap());
    let ca = fs::read(a.path().join("rotation_points.csv")).unwrap();
    let cb = fs::read(b.path().join("rotation_points.csv")).unwrap();
    assert_eq!(ca, cb);
}

#[test]
fn semi_parallel_family_chain_is_green() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["family", "--relation", "semi-parallel", "--epsilon", "1", "--n", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("family_report.json"));
    for k in ["semi_parallel", "radially_flat", "conformally_flat", "relation", "arclength", "gauss", "codazzi", "closed_forms"] {
        assert_eq!(r["verdicts"][k]["status"], "pass", "{k}");
    }
    assert!(r["diagnostics"].as_array().unwrap().iter().any(|d| d["kind"] == "halt"));
    let table = fs::read_to_string(dir.path().join("family_table.csv")).unwrap();
    assert!(table.starts_with("t,phi,a,dphi,da,mu,lambda,cos_theta,rho"));
    assert_eq!(table.lines().count(), 102);
}

#[test]
fn constant_scalar_family_has_small_spread() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["family", "--relation", "constant-scalar", "--epsilon", "-1", "--n", "4"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = read_json(&dir.path().join("family_report.json"));
    let v = &r["verdicts"]["constant_scalar"];
    assert_eq!(v["status"], "pass");
    assert!(v["value"].as_f64().unwrap() < 1e-5);
    assert_eq!(v["tolerance"], 1e-5);
}

/// The soliton family only constrains the orbit block of the soliton
/// equation; the full residual stays large and the command reports failure.
#[test]
fn soliton_family_reports_the_full_residual() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["family", "--relation", "soliton"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let r = read_json(&dir.path().join("family_report.json"));
    assert_eq!(r["verdicts"]["soliton"]["status"], "fail");
    assert_eq!(r["verdicts"]["relation"]["status"], "pass");
    assert_eq!(r["verdicts"]["rigidity"]["status"], "pass");
    assert!(r["aggregates"]["relation.soliton_orbit"]["max"].as_f64().unwrap() < 1e-4);
    let explicit = run(&["family", "--relation", "soliton", "--c", "-3.4376759481837005"], dir.path());
    assert_eq!(explicit.status.code(), Some(1));
}

#[test]
fn family_rejects_bad_initial_state() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["family", "--relation", "semi-parallel", "--dphi", "0.5"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let out = run(&["family", "--relation", "semi-parallel", "--epsilon", "0"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn selftest_reports_every_criterion_deterministically() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let oa = run(&["selftest"], a.path());
    let ob = run(&["selftest"], b.path());
    // the soliton criterion is not attainable, so the summary verdict is a failure
    assert_eq!(oa.status.code(), Some(1));
    assert_eq!(ob.status.code(), Some(1));
    let ra = without_timing(read_json(&a.path().join("selftest_report.json")));
    let rb = without_timing(read_json(&b.path().join("selftest_report.json")));
    assert_eq!(ra, rb);
    let verdicts = ra["verdicts"].as_object().unwrap();
    assert_eq!(verdicts.len(), 14);
    let failing: Vec<&String> = verdicts.iter().filter(|(_, v)| v["status"] == "fail").map(|(k, _)| k).collect();
    assert_eq!(failing, vec!["soliton family"]);
    assert_eq!(verdicts["forced failure is detected"]["status"], "pass");
    assert!(verdicts["forced failure is detected"]["detail"].as_str().unwrap().contains("perturbed shape operator"));
    let timing = read_json(&a.path().join("selftest_report.json"))["meta"]["timing"]["wall_clock_s"].as_f64().unwrap();
    assert!(timing < 60.0);
}
