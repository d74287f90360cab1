use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;

fn problem(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("problems").join(name)
}

fn run(args: &[&str], log: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_saddlecomp"))
        .args(args)
        .env("SADDLECOMP_RUNLOG", log)
        .env_remove("SADDLECOMP_BACKEND")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn value_line(text: &str) -> f64 {
    let line = text.lines().find(|l| l.starts_with("value: ")).expect("value line");
    line["value: ".len()..].trim().parse().unwrap()
}

#[test]
fn check_reports_roles() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let o = run(&["check", problem("matrix_game.json").to_str().unwrap()], &log);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("convex: [x]; concave: [y]"), "{}", stdout(&o));
}

#[test]
fn check_rejects_raw_product() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", problem("raw_product.json").to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("CurvatureViolation"), "{}", stdout(&o));
}

#[test]
fn check_reports_ambiguous_role() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["check", problem("ambiguous.json").to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("AmbiguousRole"), "{}", stdout(&o));
}

#[test]
fn solve_matrix_game_and_log() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let path = problem("matrix_game.json");
    let o = run(&["solve", path.to_str().unwrap()], &log);
    assert_eq!(o.status.code(), Some(0));
    assert!((value_line(&stdout(&o)) - 5.0 / 3.0).abs() < 1e-6);
    let o = run(&["solve", path.to_str().unwrap()], &log);
    assert_eq!(o.status.code(), Some(0));
    let lines: Vec<Value> =
        std::fs::read_to_string(&log).unwrap().lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(lines.len(), 2);
    let hash = saddlecomp::report::sha256_hex(&std::fs::read(&path).unwrap());
    for l in &lines {
        assert_eq!(l["input_sha256"], Value::String(hash.clone()));
        assert_eq!(l["status"], "Solved");
        assert!(l["wall_time_s"].as_f64().unwrap() >= 0.0);
    }
}

#[test]
fn json_report_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    let path = problem("box_set.json");
    let mut reports = Vec::new();
    for _ in 0..2 {
        let o = run(&["solve", path.to_str().unwrap(), "--json"], &log);
        assert_eq!(o.status.code(), Some(0));
        let mut v: Value = serde_json::from_str(&stdout(&o)).unwrap();
        assert!(v["timestamp"].as_f64().is_some());
        v.as_object_mut().unwrap().remove("timestamp");
        reports.push(serde_json::to_string(&v).unwrap());
    }
    assert_eq!(reports[0], reports[1]);
    let v: Value = serde_json::from_str(&reports[0]).unwrap();
    assert_eq!(v["status"], "Solved");
    assert!(v["gap"].as_f64().unwrap() <= 1e-6);
}

#[test]
fn explicit_log_path() {
    let dir = tempfile::tempdir().unwrap();
    let env_log = dir.path().join("env.jsonl");
    let flag_log = dir.path().join("flag.jsonl");
    let o = run(&["solve", problem("robust_lp.json").to_str().unwrap(), "--log", flag_log.to_str().unwrap()], &env_log);
    assert_eq!(o.status.code(), Some(0));
    assert!((value_line(&stdout(&o)) - 3.0).abs() < 1e-6);
    assert!(flag_log.exists());
    assert!(!env_log.exists());
}

#[test]
fn dualize_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("runs.jsonl");
    for (name, want) in [("matrix_game.json", 5.0 / 3.0), ("robust_lp.json", 3.0)] {
        let first = dir.path().join("first.json");
        let second = dir.path().join("second.json");
        let src = problem(name);
        for out in [&first, &second] {
            let o = run(&["dualize", src.to_str().unwrap(), "--out", out.to_str().unwrap()], &log);
            assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        }
        // same input, same bytes
        assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());
        let o = run(&["solve", first.to_str().unwrap()], &log);
        assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
        assert!((value_line(&stdout(&o)) - want).abs() < 1e-8, "{name}: {}", stdout(&o));
    }
}

#[test]
fn dualize_box_set_uses_expected_cones() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("p.json");
    let o = run(&["dualize", problem("box_set.json").to_str().unwrap(), "--out", out.to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(0));
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let kinds: Vec<&str> = v["cones"].as_array().unwrap().iter().map(|c| c["kind"].as_str().unwrap()).collect();
    assert!(kinds.contains(&"soc"));
    assert!(kinds.contains(&"nonneg"));
    // box dual multipliers: 2 x 3 nonnegative rows
    let nonneg: u64 = v["cones"].as_array().unwrap().iter().filter(|c| c["kind"] == "nonneg").map(|c| c["dim"].as_u64().unwrap()).sum();
    assert_eq!(nonneg, 6);
}

#[test]
fn infeasible_problem_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", problem("infeasible.json").to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("Infeasible"), "{}", stdout(&o));
}

#[test]
fn not_dsp_solve_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["solve", problem("raw_product.json").to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("NotDSP"));
}

#[test]
fn tight_tolerance_gives_gap_exit() {
    let dir = tempfile::tempdir().unwrap();
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(problem("matrix_game.json")).unwrap()).unwrap();
    // loose solver, no absolute floor
    v["solver"] = serde_json::json!({"abs_floor": 0.0, "tol_gap_abs": 1e-3, "tol_gap_rel": 1e-3, "tol_feas": 1e-3});
    let path = dir.path().join("loose.json");
    std::fs::write(&path, serde_json::to_string(&v).unwrap()).unwrap();
    let o = run(&["solve", path.to_str().unwrap(), "--tol", "1e-15"], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(3), "{}", stdout(&o));
    let text = stdout(&o);
    assert!(text.contains("GapTooLarge"));
    assert!(text.contains("min-max value") && text.contains("max-min value"));
}

#[test]
fn syntax_error_has_line_and_column() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, "{\n  \"variables\": [\n    {\"name\": \"x\",}\n  ]\n}\n").unwrap();
    let o = run(&["check", path.to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("line 3, column"), "{}", stdout(&o));
}

#[test]
fn unknown_operator_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(&path, r#"{"variables": [{"name": "x"}], "objective": {"minimize": ["frobnicate", "x"]}}"#).unwrap();
    let o = run(&["check", path.to_str().unwrap()], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("frobnicate"), "{}", stdout(&o));
}

#[test]
fn missing_file_and_bad_args() {
    let dir = tempfile::tempdir().unwrap();
    let log = dir.path().join("l");
    assert_eq!(run(&["check", "/nonexistent/problem.json"], &log).status.code(), Some(2));
    assert_eq!(run(&["frobnicate"], &log).status.code(), Some(2));
    assert_eq!(run(&["demo", "no_such_demo"], &log).status.code(), Some(2));
}

#[test]
fn demo_matrix_game_runs() {
    let dir = tempfile::tempdir().unwrap();
    let o = run(&["demo", "matrix_game"], &dir.path().join("l"));
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn markowitz_demo_without_psd_is_a_capability_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_saddlecomp"))
        .args(["demo", "robust_markowitz"])
        .env("SADDLECOMP_RUNLOG", dir.path().join("l"))
        .env("SADDLECOMP_BACKEND", "clarabel-nopsd")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(4));
    assert!(stdout(&o).contains("PSD"));
}

#[test]
fn unknown_backend_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_saddlecomp"))
        .args(["solve", problem("matrix_game.json").to_str().unwrap()])
        .env("SADDLECOMP_RUNLOG", dir.path().join("l"))
        .env("SADDLECOMP_BACKEND", "gurobi")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(2));
}
