use std::path::PathBuf;
use std::process::Command;

use serde_json::Value;

fn corpus(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../corpus")
        .join(format!("{name}.json"))
}

fn run(args: &[&str]) -> (i32, Value) {
    let out = Command::new(env!("CARGO_BIN_EXE_asymgame"))
        .args(args)
        .arg("--json")
        .output()
        .expect("binary runs");
    let code = out.status.code().expect("exit code");
    let report = serde_json::from_slice(&out.stdout).unwrap_or(Value::Null);
    (code, report)
}

fn value(r: &Value, key: &str) -> f64 {
    r["values"][key].as_f64().unwrap_or_else(|| panic!("missing {key} in {r}"))
}

fn path(p: &PathBuf) -> &str {
    p.to_str().unwrap()
}

#[test]
fn validate_well_formed() {
    let (code, r) = run(&["validate", path(&corpus("revelation"))]);
    assert_eq!(code, 0);
    assert_eq!(r["details"]["violations"], serde_json::json!([]));
}

#[test]
fn validate_reports_violations_with_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(
        &bad,
        r#"{"horizon": 1,
            "stages": [{"spaces": {"states": 1, "actions1": 2, "actions2": 2,
                                   "private1": 1, "private2": 1, "increments": 0},
                        "cost": [[[1, 0], [0, 1]]]}],
            "initial": [[[0.5]]]}"#,
    )
    .unwrap();
    let (code, r) = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(!r["details"]["violations"].as_array().unwrap().is_empty());
}

#[test]
fn malformed_json_reports_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\n  \"horizon\": 1,\n  \"stages\": [\n}\n").unwrap();
    let (code, r) = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(r["error"].as_str().unwrap().contains("line 4"), "{r}");
}

#[test]
fn unknown_field_names_its_path() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    let mut v: Value = serde_json::from_str(&std::fs::read_to_string(corpus("two-sided-0")).unwrap()).unwrap();
    v["stages"][1]["extra"] = Value::Bool(true);
    std::fs::write(&bad, v.to_string()).unwrap();
    let (code, r) = run(&["validate", bad.to_str().unwrap()]);
    assert_eq!(code, 2);
    assert!(r["error"].as_str().unwrap().contains("$.stages[1]"), "{r}");
}

#[test]
fn unknown_flag_rejected() {
    let out = Command::new(env!("CARGO_BIN_EXE_asymgame"))
        .args(["solve", path(&corpus("guessing")), "--bogus"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("--bogus"));
}

#[test]
fn compare_matching_pennies() {
    let (code, r) = run(&["compare", path(&corpus("matching-pennies"))]);
    assert_eq!(code, 0);
    assert!((value(&r, "solver_value") - 0.5).abs() <= 1e-9);
    assert!((value(&r, "oracle_value") - 0.5).abs() <= 1e-9);
    assert!(r["exploitability"].as_f64().unwrap() <= 1e-7);
}

#[test]
fn compare_revelation_gap() {
    let (code, r) = run(&["compare", path(&corpus("revelation"))]);
    assert_eq!(code, 0);
    let (s, o) = (value(&r, "solver_value"), value(&r, "oracle_value"));
    assert!((s - o).abs() <= 1e-3);
    assert!(s <= o + 1e-7);
    assert_eq!(r["details"]["lower_bound_sound"], Value::Bool(true));
}

fn without_timing(mut r: Value) -> Value {
    r.as_object_mut().unwrap().remove("timing_ms");
    r
}

#[test]
fn compare_is_deterministic() {
    for game in ["random-e", "two-sided-0"] {
        let file = corpus(game);
        let args = ["compare", path(&file), "--seed", "7"];
        let (c1, r1) = run(&args);
        let (c2, r2) = run(&args);
        assert_eq!((c1, c2), (0, 0));
        assert_eq!(without_timing(r1), without_timing(r2), "{game}");
    }
}

#[test]
fn oracle_refuses_imperfect_recall() {
    let (code, r) = run(&["oracle", path(&corpus("forgetful"))]);
    assert_eq!(code, 3);
    assert!(r["error"].as_str().unwrap().contains("imperfect recall"));
}

#[test]
fn oracle_cap_refusal() {
    let (code, _) = run(&["oracle", path(&corpus("random-e")), "--max-tree-nodes", "10"]);
    assert_eq!(code, 3);
}

#[test]
fn general_compare_bracket() {
    let (code, r) = run(&["compare", path(&corpus("two-sided-0"))]);
    assert_eq!(code, 0);
    assert!(value(&r, "maxmin_estimate") <= value(&r, "minmax_estimate") + 1e-9);
    assert_eq!(r["details"]["oracle_in_bracket"], Value::Bool(true));
}

#[test]
fn strategy_round_trip_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let game = corpus("revelation");
    let (code, r) = run(&["compare", path(&game), "--out-dir", dir.path().to_str().unwrap()]);
    assert_eq!(code, 0);
    let oracle = value(&r, "oracle_value");
    let p1 = dir.path().join("player1.json");
    let p2 = dir.path().join("player2.json");

    let (code, br) = run(&["best-response", path(&game), "--strategy", p1.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert!((value(&br, "best_response_value") - value(&r, "best_response_value")).abs() <= 1e-12);

    let (code, sim) = run(&[
        "simulate",
        path(&game),
        "--strategies",
        p1.to_str().unwrap(),
        p2.to_str().unwrap(),
        "--episodes",
        "20000",
    ]);
    assert_eq!(code, 0);
    let (mean, se) = (value(&sim, "mean_cost"), value(&sim, "std_error"));
    assert!(se > 0.0);
    // Player 2's exported play is a heuristic, so the cost sits at or below
    // the value player 1 guarantees.
    assert!(mean <= value(&r, "best_response_value") + 4.0 * se, "{mean} vs {oracle}");
}

#[test]
fn value_and_export_alpha() {
    let dir = tempfile::tempdir().unwrap();
    let game = corpus("guessing");
    let (code, r) = run(&["value", path(&game), "--belief", "0.5,0.5"]);
    assert_eq!(code, 0);
    assert!((value(&r, "value") - 0.5).abs() <= 1e-9);
    let out = dir.path().join("alpha.json");
    let (code, r) = run(&["export-alpha", path(&game), "--out", out.to_str().unwrap()]);
    assert_eq!(code, 0);
    assert_eq!(r["artifacts"][0].as_str().unwrap(), out.to_str().unwrap());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(v["alpha_sets"].as_array().unwrap().len(), 3);
}

#[test]
fn regression_and_grid_methods_run() {
    let (code, r) = run(&["solve", path(&corpus("revelation")), "--method", "regression", "--samples", "30"]);
    assert_eq!(code, 0);
    assert!(value(&r, "regression_value").is_finite());
    let (code, r) = run(&["solve", path(&corpus("full-information")), "--belief-grid", "10", "--prescription-grid", "4"]);
    assert_eq!(code, 0);
    assert!(value(&r, "maxmin_estimate") <= value(&r, "minmax_estimate") + 1e-9);
}
