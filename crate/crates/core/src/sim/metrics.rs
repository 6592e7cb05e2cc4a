//! Run summary computed from the step log alone.

use serde::{Deserialize, Serialize};

use super::log::StepRecord;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Metrics {
    pub duration: f64,
    pub distance: f64,
    pub max_lateral_error: f64,
    pub max_tracking_error: f64,
    pub max_lateral_accel: f64,
    pub max_mpc_wall_ms: f64,
    pub mean_mpc_wall_ms: f64,
    pub planner_cycles: usize,
    pub failed_cycles: usize,
    /// `None` when the scenario has no obstacles.
    pub min_obstacle_clearance: Option<f64>,
    pub max_friction_use: f64,
    pub wheel_lift_steps: usize,
    pub max_speed: f64,
    pub completed: bool,
}

pub fn compute_metrics(steps: &[StepRecord]) -> Metrics {
    let mut m = Metrics::default();
    let (Some(first), Some(last)) = (steps.first(), steps.last()) else {
        return m;
    };
    m.duration = last.t - first.t;
    m.distance = last.s - first.s;
    m.completed = last.completed;
    let mut wall_sum = 0.0;
    let mut clearance = f64::INFINITY;
    for r in steps {
        m.max_lateral_error = m.max_lateral_error.max(r.lateral_error.abs());
        m.max_tracking_error = m.max_tracking_error.max(r.tracking_error.abs());
        m.max_lateral_accel = m.max_lateral_accel.max(r.lateral_accel.abs());
        m.max_friction_use = m.max_friction_use.max(r.friction_use);
        m.max_speed = m.max_speed.max(r.vx.hypot(r.vy));
        clearance = clearance.min(r.clearance);
        if r.wheel_lift {
            m.wheel_lift_steps += 1;
        }
        if r.planner_tick {
            m.planner_cycles += 1;
            if r.mpc_failed {
                m.failed_cycles += 1;
            }
            wall_sum += r.mpc_wall_ms;
            m.max_mpc_wall_ms = m.max_mpc_wall_ms.max(r.mpc_wall_ms);
        }
    }
    if m.planner_cycles > 0 {
        m.mean_mpc_wall_ms = wall_sum / m.planner_cycles as f64;
    }
    m.min_obstacle_clearance = clearance.is_finite().then_some(clearance);
    m
}
