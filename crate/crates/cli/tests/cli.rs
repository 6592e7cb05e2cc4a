use std::fs;
use std::path::PathBuf;

use assert_cmd::Command;

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

fn fmpc() -> Command {
    Command::cargo_bin("fmpc").unwrap()
}

#[test]
fn track_gen_reproduces_shipped_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("track.csv");
    fmpc()
        .args(["track", "gen", "--spec"])
        .arg(scenarios().join("circuit_spec.toml"))
        .arg("--out")
        .arg(&out)
        .assert()
        .success();
    let shipped = fs::read_to_string(scenarios().join("circuit.csv")).unwrap();
    assert_eq!(fs::read_to_string(&out).unwrap(), shipped);
}

#[test]
fn run_then_metrics_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let out = fmpc()
        .arg("run")
        .arg("--scenario")
        .arg(scenarios().join("circuit_obstacles.toml"))
        .arg("--out")
        .arg(&run)
        .args(["--duration", "8"])
        .assert()
        .success()
        .get_output()
        .stdout
        .clone();
    let text = String::from_utf8(out).unwrap();
    assert!(text.contains("outcome: TimeUp"), "{text}");
    for f in ["log.csv", "plans.csv", "metrics.json", "trajectory.svg", "speed.svg", "steering.svg", "torque.svg"] {
        assert!(run.join(f).is_file(), "missing {f}");
    }
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    assert!(summary["planner_cycles"].as_u64().unwrap() >= 79);

    let out = fmpc().arg("metrics").arg("--log").arg(run.join("log.csv")).assert().success().get_output().stdout.clone();
    let recomputed: serde_json::Value = serde_json::from_slice(&out).unwrap();
    assert_eq!(recomputed["max_lateral_error"], summary["max_lateral_error"]);
    assert_eq!(recomputed["distance"], summary["distance"]);

    let plots = dir.path().join("plots");
    fmpc().arg("plot").arg("--log").arg(run.join("log.csv")).arg("--out").arg(&plots).assert().success();
    assert!(plots.join("speed.svg").is_file());
}

#[test]
fn no_obstacles_flag_drops_clearance() {
    let dir = tempfile::tempdir().unwrap();
    fmpc()
        .arg("run")
        .arg("--scenario")
        .arg(scenarios().join("circuit_obstacles.toml"))
        .arg("--out")
        .arg(dir.path())
        .args(["--duration", "2", "--no-obstacles"])
        .assert()
        .success();
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("metrics.json")).unwrap()).unwrap();
    assert!(summary["min_obstacle_clearance"].is_null());
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let out = fmpc()
        .args(["run", "--scenario", "does/not/exist.toml", "--out"])
        .arg(dir.path())
        .assert()
        .failure()
        .get_output()
        .stderr
        .clone();
    assert!(String::from_utf8(out).unwrap().starts_with("error:"));
    fmpc()
        .arg("run")
        .arg("--scenario")
        .arg(scenarios().join("circuit.toml"))
        .arg("--out")
        .arg(dir.path())
        .args(["--duration", "-1"])
        .assert()
        .failure();
    fmpc().args(["metrics", "--log", "nope.csv"]).assert().failure();
}
