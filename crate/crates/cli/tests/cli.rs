use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn config(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn singconv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_singconv"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_cmd(cmd: &str, cfg: &str, out: &Path, extra: &[&str]) -> Output {
    let cfg = config(cfg);
    let mut args = vec![cmd, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    singconv(&args)
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(p).unwrap()).unwrap()
}

fn verdicts(report: &Value) -> Vec<(String, String)> {
    report["reports"]
        .as_array()
        .unwrap()
        .iter()
        .map(|r| (r["condition"].as_str().unwrap().to_string(), r["verdict"].as_str().unwrap().to_string()))
        .collect()
}

#[test]
fn validate_box_passes_six_conditions() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("validate", "box.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let v = verdicts(&read_json(&dir.path().join("validate.json")));
    assert_eq!(v.len(), 6);
    assert!(v.iter().all(|(_, verdict)| verdict == "Pass"), "{v:?}");
    assert!(dir.path().join("validate.csv").exists());
}

#[test]
fn validate_fixed_spread_fails_b_d_e() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("validate", "fixed_spread.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(2));
    let report = read_json(&dir.path().join("validate.json"));
    for (c, verdict) in verdicts(&report) {
        if ["B", "D", "E"].contains(&c.as_str()) {
            assert_eq!(verdict, "Fail", "{c}");
        }
    }
    // the (e) witness is the 3/4 tail outside gamma = 1/2
    let e = &report["reports"][4];
    let w = e["witness"].as_array().unwrap();
    assert!((w.last().unwrap().as_f64().unwrap() - 0.75).abs() < 1e-12);
}

#[test]
fn unknown_kernel_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("validate", "unknown_kernel.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no_such_kernel"));
}

#[test]
fn malformed_config_reports_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, "{\n  \"kernel\": {\"catalog\": \"box\"},\n  \"bogus\": 1\n}\n").unwrap();
    let o = singconv(&["validate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 3"));
}

#[test]
fn missing_radii_is_inconclusive() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("validate", "box_expression_no_radii.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    let v = verdicts(&read_json(&dir.path().join("validate.json")));
    assert_eq!(v[5], ("F".to_string(), "Inconclusive".to_string()));
    assert!(v[..5].iter().all(|(_, verdict)| verdict == "Pass"), "{v:?}");
}

#[test]
fn bad_seed_tolerance_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("validate", "box.json", dir.path(), &["--seed-tolerances", "nope=1"]);
    assert_eq!(o.status.code(), Some(1));
    let o = run_cmd("validate", "box.json", dir.path(), &["--seed-tolerances", "tol_cond=1e-7"]);
    assert_eq!(o.status.code(), Some(0));
    let report = read_json(&dir.path().join("validate.json"));
    assert_eq!(report["config"]["tolerances"]["tol_cond"].as_f64(), Some(1e-7));
}

fn eval(cfg: &str, x: &str, y: &str, lambda: &str) -> (Option<i32>, String) {
    let cfg = config(cfg);
    let o = singconv(&["eval", "--config", cfg.to_str().unwrap(), "--x", x, "--y", y, "--lambda", lambda]);
    (o.status.code(), stdout(&o))
}

fn printed_value(s: &str) -> f64 {
    s.split_whitespace().next().unwrap().parse().unwrap()
}

#[test]
fn eval_examples() {
    let (code, out) = eval("converge_box.json", "0.2", "0.3", "10");
    assert_eq!(code, Some(0));
    assert!((printed_value(&out) - 0.25).abs() < 1e-12, "{out}");
    assert!(out.contains("tol 1e-10"));

    let (code, out) = eval("constant_five.json", "0.4", "0.6", "7");
    assert_eq!(code, Some(0));
    assert!((printed_value(&out) - 5.0).abs() < 1e-12, "{out}");

    let (_, out) = eval("constant_five.json", "0.95", "0.95", "10");
    assert!((printed_value(&out) - 1.25).abs() < 1e-12, "{out}");
}

#[test]
fn eval_outside_index_set_is_numeric_failure() {
    let (code, _) = eval("converge_box.json", "0.3", "0.3", "0.5");
    assert_eq!(code, Some(4));
}

#[test]
fn converge_continuity_point() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("converge", "converge_sum_sq.json", dir.path(), &["--gnuplot-script"]);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("converge.json"));
    assert_eq!(r["converged"], Value::Bool(true));
    assert!(r["warning"].is_null());
    let trace = &r["trace"];
    let errors = trace["errors"].as_array().unwrap();
    let points = trace["path"]["points"].as_array().unwrap();
    for (e, p) in errors.iter().zip(points) {
        let l = p[2].as_f64().unwrap();
        let oracle = 2.0 * (0.5 / l + 1.0 / (3.0 * l * l));
        assert!((e.as_f64().unwrap() - oracle).abs() < 1e-9, "lambda {l}");
    }
    let gp = std::fs::read_to_string(dir.path().join("converge.gp")).unwrap();
    assert!(gp.contains("'converge.csv'"));
    let csv = std::fs::read_to_string(dir.path().join("converge.csv")).unwrap();
    assert!(csv.starts_with("# config: {"));
    assert_eq!(csv.lines().nth(1), Some("j,x,y,lambda,value,error,closed_form_error"));
}

#[test]
fn converge_at_quadrant_jump_does_not_converge() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("converge", "converge_quadrant_jump.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("converge.json"));
    assert_eq!(r["converged"], Value::Bool(false));
    assert!(r["warning"].as_str().unwrap().contains("not verified"));
    assert!((r["final_error"].as_f64().unwrap() - 1.0).abs() < 1e-9);
}

#[test]
fn converge_constant_has_zero_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("converge", "constant_five.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = read_json(&dir.path().join("converge.json"));
    for e in r["trace"]["errors"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-12);
    }
}

#[test]
fn rate_box_reproduction() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("rate", "rate_box.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = &read_json(&dir.path().join("rate.json"))["report"];
    assert!((r["delta_fit"]["exponent"].as_f64().unwrap() - 2.0).abs() < 0.05);
    let conds = r["conditions"].as_array().unwrap();
    for c in &conds[1..4] {
        assert_eq!(c["verdict"], "Pass", "{}", c["name"]);
    }
    let cmp = &r["exponent_comparison"];
    assert_eq!(cmp["claimed"]["label"], "1 + alpha");
    assert_eq!(cmp["coincide"], Value::Bool(true));
    assert!(dir.path().join("rate.csv").exists());
}

#[test]
fn rate_gauss_fixed_delta_fails_i() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("rate", "rate_gauss_fixed_delta.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(0));
    let r = &read_json(&dir.path().join("rate.json"))["report"];
    assert_eq!(r["conditions"][0]["verdict"], "Fail");
    assert!(stdout(&o).contains("(i) Fail"));
}

#[test]
fn rate_without_delta_rule_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_cmd("rate", "converge_box.json", dir.path(), &[]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    for d in [&a, &b] {
        run_cmd("converge", "converge_sum_sq.json", d.path(), &[]);
    }
    for f in ["converge.json", "converge.csv", "lebesgue.csv"] {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        assert_eq!(x, y, "{f}");
    }
    // the timestamped sidecar is the only other file
    assert!(a.path().join("run.log").exists());
}

#[test]
fn help_exits_zero_and_bad_subcommand_exits_one() {
    assert_eq!(singconv(&["--help"]).status.code(), Some(0));
    assert_eq!(singconv(&["frobnicate"]).status.code(), Some(1));
}
