mod common;

use std::path::PathBuf;

use common::straight;
use fmpc_core::control::{dispatch_torques, longitudinal_control, ControllerConfig, Pid};
use fmpc_core::path::ReferencePath;
use fmpc_core::plant::{PlantInput, PlantParams, PlantState, VehiclePlant};
use fmpc_core::sim::{run_scenario, Outcome, Scenario, ScenarioConfig};
use fmpc_core::track::{read_track_csv, TrackSpec};

fn scenarios() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../scenarios")
}

/// Speed trace at 100 Hz for a step from 10 m/s to `target`.
fn speed_step(target: f64, seconds: f64) -> Vec<f64> {
    let p = PlantParams::default();
    let mut plant = VehiclePlant::new(p, PlantState::rolling(0.0, 0.0, 0.0, 10.0, p.r_eff), 1e-3).unwrap();
    let mut pid = Pid::new(ControllerConfig::default().longitudinal);
    let ticks = (seconds / 0.01).round() as usize;
    (0..ticks)
        .map(|_| {
            let force = longitudinal_control(plant.state().speed(), target, 0.01, &mut pid);
            let u = PlantInput { torque: dispatch_torques(force, p.r_eff), steer: 0.0 };
            for _ in 0..10 {
                plant.step(&u).unwrap();
            }
            plant.state().speed()
        })
        .collect()
}

#[test]
fn speed_loop_small_step_has_no_overshoot() {
    let v = speed_step(10.5, 3.0);
    let peak = v.iter().copied().fold(0.0, f64::max);
    assert!(peak < 10.51, "peak {peak}");
    assert!(v[100..].iter().all(|x| (x - 10.5).abs() < 0.01), "{}", v[100]);
}

#[test]
fn speed_loop_large_step_settles() {
    let v = speed_step(12.0, 4.0);
    let peak = v.iter().copied().fold(0.0, f64::max);
    assert!(peak < 13.0, "peak {peak}");
    assert!(v[200..].iter().all(|x| (x - 12.0).abs() < 0.01));
}

#[test]
fn straight_road_is_tracked_closely() {
    let path = straight(500.0);
    let mut cfg = ScenarioConfig::new("unused");
    cfg.duration = 60.0;
    cfg.initial.speed = 12.0;
    let r = run_scenario(&Scenario::from_parts(cfg, path, vec![])).unwrap();
    assert_eq!(r.log.outcome, Outcome::Completed, "{:?}", r.log.note);
    assert!(r.metrics.max_lateral_error < 0.05, "{}", r.metrics.max_lateral_error);
    assert_eq!(r.metrics.failed_cycles, 0);
    assert!(r.metrics.distance > 400.0);
}

#[test]
fn lateral_offset_start_converges() {
    let path = straight(400.0);
    let mut cfg = ScenarioConfig::new("unused");
    cfg.duration = 20.0;
    cfg.initial.speed = 10.0;
    cfg.initial.lateral_offset = 0.5;
    let r = run_scenario(&Scenario::from_parts(cfg, path, vec![])).unwrap();
    let tail = &r.log.steps[r.log.steps.len() - 2000..];
    assert!(tail.iter().all(|s| s.lateral_error.abs() < 0.05), "{:?}", tail.last().map(|s| s.lateral_error));
}

#[test]
fn shipped_track_matches_generator() {
    let shipped = read_track_csv(scenarios().join("circuit.csv")).unwrap();
    let from_spec = TrackSpec::load(scenarios().join("circuit_spec.toml")).unwrap().generate().unwrap();
    let builtin = TrackSpec::demo_circuit().generate().unwrap();
    assert_eq!(from_spec, builtin);
    assert_eq!(shipped.len(), builtin.len());
    for (a, b) in shipped.iter().zip(&builtin) {
        assert!((a - b).norm() < 1e-3, "{a} vs {b}");
    }
    let path = ReferencePath::build(&shipped, 1.0).unwrap();
    let expected: f64 = TrackSpec::demo_circuit().segments.iter().map(|s| s.length()).sum();
    assert!((path.total_length() - expected).abs() < 0.5, "{} vs {expected}", path.total_length());
}

#[test]
fn shipped_scenarios_load() {
    for name in ["circuit.toml", "circuit_obstacles.toml"] {
        let cfg = ScenarioConfig::load(scenarios().join(name)).unwrap();
        let sc = Scenario::load(cfg).unwrap();
        assert!(sc.path.total_length() > 700.0);
    }
}
