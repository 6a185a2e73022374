use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_slowfast")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const TQSSA: &str = r#"{"epsilon": 0.001, "categories": {"alpha": "one", "beta": "one", "gamma": "small"},
    "tilde": {"alpha": 0.75, "beta": 1.0, "gamma": 1.0}}"#;

const KF: &str = r#"{"epsilon": 5e-6, "categories": {"alpha": "one", "beta": "one", "gamma": "small",
    "rho1": "small", "rho2": "small", "rho3": "small", "rho4": "small", "rho5": "small", "rho6": "small"}}"#;

#[test]
fn reduce_tqssa_reports_first_order_field() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "tqssa.json", TQSSA);
    let o = run(&["reduce", "--model", "mm-irreversible", "--scaling", &sc, "--order", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["configuration"], "oos");
    let pts = v["branches"][0]["points"].as_array().unwrap();
    assert_eq!(pts.len(), 20);
    let at_one = pts.iter().find(|p| p["rho"][0] == 1.0).unwrap();
    let r1 = at_one["R1"][0].as_f64().unwrap();
    assert!((r1 + 0.459016).abs() < 1e-6, "{r1}");
    assert!(at_one["residual"].as_f64().unwrap() < 1e-5);
}

#[test]
fn reduce_kf_gives_three_dimensional_field() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "kf.json", KF);
    let out = dir.path().join("out");
    let o = run(&["reduce", "--model", "kim-forger", "--scaling", &sc, "--format", "csv", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = fs::read_to_string(out.join("reduction.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), "branch,rho,eta,eigenvalues,R1,residual");
    let rows: Vec<&str> = lines.collect();
    assert_eq!(rows.len(), 27);
    let mut r = csv::Reader::from_reader(text.as_bytes());
    for rec in r.records() {
        let rec = rec.unwrap();
        assert_eq!(rec[1].split(';').count(), 3);
        assert_eq!(rec[4].split(';').count(), 3);
    }
}

#[test]
fn missing_tilde_names_the_parameter() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(
        dir.path(),
        "bad.json",
        r#"{"categories": {"alpha": "one", "beta": "one", "gamma": "small"}, "tilde": {"alpha": 0.75, "beta": 1.0}}"#,
    );
    let o = run(&["reduce", "--model", "mm-irreversible", "--scaling", &sc]);
    assert_eq!(o.status.code(), Some(2));
    let e = stderr(&o);
    assert!(e.contains("scaling") && e.contains("'gamma'"), "{e}");
}

#[test]
fn validation_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "tqssa.json", TQSSA);
    let o = run(&["reduce", "--model", "mm-irreversible", "--scaling", &sc, "--order", "6"]);
    assert_eq!(o.status.code(), Some(2));
    let o = run(&["reduce", "--model", "no-such-model", "--scaling", &sc]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("model"));
    let o = run(&["reduce", "--model", "mm-irreversible", "--scaling", &sc, "--epsilon", "-1"]);
    assert_eq!(o.status.code(), Some(2));
    let flat = write(
        dir.path(),
        "flat.json",
        r#"{"categories": {"alpha": "one", "beta": "one", "gamma": "one"}, "tilde": {"alpha": 1, "beta": 1, "gamma": 1}}"#,
    );
    let o = run(&["reduce", "--model", "mm-irreversible", "--scaling", &flat]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("not singularly perturbed"));
    let o = run(&["simulate", "--engine", "rk4"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).starts_with("error: integrate"));
}

#[test]
fn kf_at_higher_order_is_unsupported() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "kf.json", KF);
    let o = run(&["reduce", "--model", "kim-forger", "--scaling", &sc, "--order", "2"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parametrize"));
}

#[test]
fn empty_critical_set_is_a_numerical_failure() {
    let dir = tempfile::tempdir().unwrap();
    // fast part c' = 1 + c^2 has no real zero
    let model = write(
        dir.path(),
        "model.json",
        r#"{"species": ["s", "c"], "params": {"k": null},
            "reactions": [
              {"reactants": {}, "products": {"c": 1}, "rate": null},
              {"reactants": {"c": 2}, "products": {"c": 3}, "rate": null},
              {"reactants": {"s": 1}, "products": {}, "rate": "k"}],
            "ics": {"s": 1, "c": 0}}"#,
    );
    let sc = write(dir.path(), "sc.json", r#"{"epsilon": 0.01, "categories": {"k": "small"}, "tilde": {"k": 1.0}}"#);
    let o = run(&["reduce", "--model", &model, "--scaling", &sc]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("geometry: numerical failure"));
}

#[test]
fn classify_tqssa() {
    let dir = tempfile::tempdir().unwrap();
    let sc = write(dir.path(), "tqssa.json", TQSSA);
    let o = run(&["classify", "--model", "mm-irreversible", "--scaling", &sc]);
    assert!(o.status.success());
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["singular"], true);
    assert_eq!(v["k"], 1);
    assert_eq!(v["form"], "1");
    assert_eq!(v["branches"][0]["fiber_class"], "T");
}

#[test]
fn catalogue_irreversible_table_and_summary() {
    let o = run(&["catalogue", "--scheme", "irreversible"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 28);
    assert!(stderr(&o).contains("23 singular, 16 NH, S=11 T=5 R=7"), "{}", stderr(&o));
}

#[test]
fn catalogue_reversible_files() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["catalogue", "--scheme", "reversible", "--out", out, "--verify-oracles"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let s = stdout(&o);
    assert!(s.contains("67 singular, 47 NH, S=43 T=14 R=10, 27 relevant"), "{s}");
    assert_eq!(s.lines().filter(|l| l.starts_with("PASS ")).count(), 28);
    assert!(!s.lines().any(|l| l.starts_with("FAIL ")));
    assert!(s.contains("S.2b(ix)") && s.contains("product mismatch"));
    let csv = fs::read_to_string(dir.path().join("catalogue_reversible.csv")).unwrap();
    assert_eq!(csv.lines().count(), 82);
    assert!(csv.lines().skip(1).any(|l| l.ends_with(",pass")));
    let oracles: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("oracles.json")).unwrap()).unwrap();
    assert_eq!(oracles.as_array().unwrap().len(), 28);
}

#[test]
fn catalogue_json_is_deterministic() {
    let a = run(&["catalogue", "--format", "json", "--verify-oracles", "--seed", "3"]);
    let b = run(&["catalogue", "--format", "json", "--verify-oracles", "--seed", "3"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(a.stderr, b.stderr);
    let text = stdout(&a);
    let tables: Vec<Value> = serde_json::Deserializer::from_str(&text).into_iter().map(|v| v.unwrap()).collect();
    let sizes: Vec<usize> = tables.iter().map(|t| t.as_array().unwrap().len()).collect();
    assert_eq!(sizes, [27, 81]);
}

#[test]
fn simulate_tqssa_writes_figure_data() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["simulate", "--scenario", "tqssa", "--out", out, "--samples", "200"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!((v["base_point"][0].as_f64().unwrap() - 0.568729).abs() < 1e-6);
    assert_eq!(v["gamma"], 0.005);
    assert!(v["sup_error_s_after_layer"].as_f64().unwrap() < 5e-3);
    let full = fs::read_to_string(dir.path().join("tqssa_full.csv")).unwrap();
    assert_eq!(full.lines().next().unwrap(), "t,s,c");
    assert_eq!(full.lines().count(), 201);
    let red = fs::read_to_string(dir.path().join("tqssa_reduced.csv")).unwrap();
    assert!(red.lines().nth(1).unwrap().starts_with("0e0,5.68729"));
    let again = run(&["simulate", "--scenario", "tqssa", "--samples", "200", "--engine", "explicit"]);
    assert_eq!(again.stdout, o.stdout);
}

#[test]
fn simulate_engine_flag_switches_integrator() {
    let o = run(&["simulate", "--engine", "implicit", "--samples", "50"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["engine"], "implicit");
    assert!(v["sup_error_s_after_layer"].as_f64().unwrap() < 5e-3);
}

#[test]
fn simulate_kf_pair_short_horizon() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["simulate", "--scenario", "kf", "--horizon", "2e6", "--samples", "100", "--out", out]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(v["runs"].as_array().unwrap().len(), 2);
    assert_eq!(v["runs"][1]["gamma_over_rho6"], 1.5);
    for name in ["kf_gamma1.0_full.csv", "kf_gamma1.5_reduced.csv", "kf_comparison.json"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    let full = fs::read_to_string(dir.path().join("kf_gamma1.5_full.csv")).unwrap();
    assert_eq!(full.lines().next().unwrap(), "t,x,y,z,s");
}

#[test]
fn kf_reduction_check() {
    let o = run(&["kf", "--seed", "11"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["max_field_rel_error"].as_f64().unwrap() <= 1e-10);
    assert!(v["max_sigma_sum_error"].as_f64().unwrap() <= 1e-14);
    assert!((v["k0"].as_f64().unwrap() - 0.996016).abs() < 1e-6);
}
