use std::path::Path;
use std::process::{Command, Output};

fn regretforge(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_regretforge"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn last_record(o: &Output) -> serde_json::Value {
    serde_json::from_str(stdout(o).lines().last().expect("output")).unwrap()
}

#[test]
fn oracle_sweep_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = regretforge(dir.path(), &["oracle", "--eta-grid", "0:0.5:0.01"]);
    assert!(o.status.success());
    let summary = last_record(&o);
    assert_eq!(summary["failed"], 0);
    assert_eq!(summary["points"], 51);
    assert!(summary["max_nash_gap"].as_f64().unwrap() <= 1e-9);
}

#[test]
fn gradcheck_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let o = regretforge(dir.path(), &["gradcheck"]);
    assert!(o.status.success(), "{}", stdout(&o));
    assert_eq!(last_record(&o)["failed"], 0);
}

#[test]
fn malformed_config_names_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"distribution": {"family": "biased_shapley", "low": 0, "high": 0.5},
  "log2_step": 4}"#)
        .unwrap();
    let o = regretforge(dir.path(), &["eval", "--config", cfg.to_str().unwrap()]);
    assert!(!o.status.success());
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
    let msg = err["message"].as_str().unwrap();
    assert!(msg.contains("log2_step") && msg.contains("line 2"), "{msg}");
}

#[test]
fn bad_eta_grid_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = regretforge(dir.path(), &["oracle", "--eta-grid", "0:1"]);
    assert_eq!(o.status.code(), Some(2));
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "config");
}

#[test]
fn eval_is_reproducible_and_tables_rebuild() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"distribution": {"family": "biased_shapley", "low": 0, "high": 0.5},
            "algorithms": ["cfr", "pcfr+"], "samples": 4, "log2_steps": 8, "seeds": [1, 2]}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    for out in ["a", "b"] {
        assert!(regretforge(dir.path(), &["eval", "--config", c, "--out", out]).status.success());
    }
    let a = std::fs::read(dir.path().join("a/results.csv")).unwrap();
    assert_eq!(a, std::fs::read(dir.path().join("b/results.csv")).unwrap());
    assert_eq!(String::from_utf8(a).unwrap().lines().count(), 1 + 2 * 2 * 4 * 9);
    assert!(dir.path().join("a/timings.csv").exists());

    let tables = std::fs::read_to_string(dir.path().join("a/tables.json")).unwrap();
    std::fs::remove_file(dir.path().join("a/tables.json")).unwrap();
    assert!(regretforge(dir.path(), &["table", "--config", c, "--out", "a"]).status.success());
    assert_eq!(tables, std::fs::read_to_string(dir.path().join("a/tables.json")).unwrap());
}

#[test]
fn train_then_solve_with_the_checkpoint() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    std::fs::write(
        &cfg,
        r#"{"distribution": {"family": "biased_shapley", "low": 0, "high": 0.5},
            "algorithms": ["npcfr"], "log2_steps": 6,
            "train": {"epochs": 3, "horizon": 4, "batch": 2, "hidden": 4, "embed": 2}}"#,
    )
    .unwrap();
    let c = cfg.to_str().unwrap();
    let o = regretforge(dir.path(), &["train", "--config", c, "--out", "t", "--checkpoint", "t/p.rfck"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let log = std::fs::read_to_string(dir.path().join("t/train_log.csv")).unwrap();
    assert_eq!(log.lines().next(), Some("epoch,loss"));
    assert_eq!(log.lines().count(), 4);

    let o = regretforge(dir.path(), &["solve", "--config", c, "--checkpoint", "t/p.rfck", "--param", "0.3", "--out", "s"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert_eq!(last_record(&o)["steps"], 64);

    let o = regretforge(dir.path(), &["solve", "--config", c, "--out", "s"]);
    let err: serde_json::Value = serde_json::from_slice(&o.stderr).unwrap();
    assert_eq!(err["error"], "missing_checkpoint");
}
