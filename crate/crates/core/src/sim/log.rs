//! Simulation records and their CSV form. The column order of the step log
//! is the field order of [`StepRecord`].

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::mpc::PlannedTrajectory;

/// One plant step: the state at `t` and the command held over `[t, t + dt)`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    pub t: f64,
    pub vx: f64,
    pub vy: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub roll: f64,
    pub roll_rate: f64,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub omega_fl: f64,
    pub omega_fr: f64,
    pub omega_rl: f64,
    pub omega_rr: f64,
    pub x: f64,
    pub y: f64,
    pub torque_fl: f64,
    pub torque_fr: f64,
    pub torque_rl: f64,
    pub torque_rr: f64,
    pub steer: f64,
    pub steer_ol: f64,
    pub steer_cl: f64,
    pub yaw_error: f64,
    pub ref_x: f64,
    pub ref_y: f64,
    pub ref_v: f64,
    pub ref_yaw: f64,
    pub ref_steer: f64,
    /// Station of the plant CoG on the path.
    pub s: f64,
    /// Signed distance to the path, left positive.
    pub lateral_error: f64,
    /// Offset from the planned position, across the planned heading.
    pub tracking_error: f64,
    pub lateral_accel: f64,
    pub fz_fl: f64,
    pub fz_fr: f64,
    pub fz_rl: f64,
    pub fz_rr: f64,
    pub friction_use: f64,
    pub wheel_lift: bool,
    /// Distance from the CoG to the nearest obstacle polygon.
    pub clearance: f64,
    /// Heuristic speed of the latest planner cycle.
    pub v_heur: f64,
    /// Speed measured at the latest planner cycle.
    pub v_plan: f64,
    pub planner_tick: bool,
    pub mpc_iterations: usize,
    pub mpc_converged: bool,
    pub mpc_kkt: f64,
    pub mpc_cost: f64,
    pub mpc_penalty: f64,
    pub mpc_wall_ms: f64,
    pub mpc_failed: bool,
    pub stale: bool,
    pub fallback: bool,
    /// Set on the final record when the run reached the end of the track.
    pub completed: bool,
}

/// Columns that depend on host timing and are excluded from determinism checks.
pub const WALL_TIME_COLUMNS: &[&str] = &["mpc_wall_ms"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    Completed,
    TimeUp,
    Aborted,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanRecord {
    pub cycle: usize,
    pub trajectory: PlannedTrajectory,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimLog {
    pub steps: Vec<StepRecord>,
    pub plans: Vec<PlanRecord>,
    pub outcome: Outcome,
    /// Human-readable reason for an abort.
    pub note: Option<String>,
    pub plant_dt: f64,
}

impl SimLog {
    /// Step records with wall-time columns zeroed.
    pub fn without_wall_time(&self) -> Vec<StepRecord> {
        self.steps.iter().map(|r| StepRecord { mpc_wall_ms: 0.0, ..*r }).collect()
    }
}

/// Flat row of `plans.csv`: one per planned state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
struct PlanRow {
    cycle: usize,
    k: usize,
    t: f64,
    s: f64,
    x: f64,
    y: f64,
    v: f64,
    yaw: f64,
    steer: f64,
    v_heur: f64,
    u1: f64,
    u2: f64,
    obs_tol: f64,
    x_tol: f64,
    y_tol: f64,
    delta_tol: f64,
}

pub fn write_steps_csv(path: &Path, steps: &[StepRecord]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))?;
    if steps.is_empty() {
        w.write_record(step_columns()).map_err(|e| SimError::csv(path, e))?;
    }
    for r in steps {
        w.serialize(r).map_err(|e| SimError::csv(path, e))?;
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

/// Reads a step log, requiring the exact header.
pub fn read_steps_csv(path: &Path) -> Result<Vec<StepRecord>, SimError> {
    let mut rdr = csv::Reader::from_path(path).map_err(|e| SimError::csv(path, e))?;
    let header = rdr.headers().map_err(|e| SimError::csv(path, e))?.clone();
    let expected = step_columns();
    if header.iter().ne(expected.iter().map(String::as_str)) {
        return Err(SimError::Config(format!("{}: header does not match the step log columns", path.display())));
    }
    rdr.deserialize().map(|r| r.map_err(|e| SimError::csv(path, e))).collect()
}

pub fn write_plans_csv(path: &Path, plans: &[PlanRecord]) -> Result<(), SimError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| SimError::csv(path, e))?;
    for p in plans {
        let tr = &p.trajectory;
        for (k, st) in tr.states.iter().enumerate() {
            let c = if k > 0 { tr.controls[k - 1] } else { Default::default() };
            let u = tr.controls.get(k).copied().unwrap_or_default();
            w.serialize(PlanRow {
                cycle: p.cycle,
                k,
                t: tr.time(k),
                s: st.s,
                x: st.x,
                y: st.y,
                v: st.v,
                yaw: st.yaw,
                steer: st.steer,
                v_heur: tr.v_heur[k],
                u1: u.u1,
                u2: u.u2,
                obs_tol: c.obs_tol,
                x_tol: c.x_tol,
                y_tol: c.y_tol,
                delta_tol: c.delta_tol,
            })
            .map_err(|e| SimError::csv(path, e))?;
        }
    }
    w.flush().map_err(|e| SimError::io(path, e))
}

/// Column names of the step log, in order.
pub fn step_columns() -> Vec<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.serialize(StepRecord::default()).expect("in-memory write");
    let bytes = w.into_inner().expect("in-memory flush");
    let text = String::from_utf8(bytes).expect("utf8");
    text.lines().next().unwrap_or_default().split(',').map(str::to_string).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_with_infinite_clearance() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("log.csv");
        let rows = vec![
            StepRecord { t: 0.0, clearance: f64::INFINITY, planner_tick: true, ..Default::default() },
            StepRecord { t: 0.001, vx: 15.0, completed: true, ..Default::default() },
        ];
        write_steps_csv(&f, &rows).unwrap();
        assert_eq!(read_steps_csv(&f).unwrap(), rows);
        let text = std::fs::read_to_string(&f).unwrap();
        assert!(text.starts_with("t,vx,vy,yaw,"));
    }

    #[test]
    fn header_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let f = dir.path().join("log.csv");
        std::fs::write(&f, "t,vx\n0,1\n").unwrap();
        assert!(read_steps_csv(&f).is_err());
    }
}
