//! Kinematic-bicycle MPC planner.
//!
//! The decision variables are the acceleration and steering rate of every
//! stage; states follow by forward simulation, so every iterate is
//! dynamically consistent. Each slack of the soft constraints is replaced by
//! its optimal value given the states (`x_tol = |e_lon|`,
//! `obs_tol = max(0, interior)`, and so on), which leaves a box-constrained
//! nonlinear least-squares problem solved by Gauss-Newton SQP.

mod problem;
mod qp;
mod solver;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematic::{KbmInput, KbmState};

pub use problem::{build_problem, Evaluation, MpcProblem, ResidualKind, RESIDUALS_PER_STAGE};
pub use qp::solve_box_qp;
pub use solver::{kkt_residual, solve};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MpcError {
    #[error("path ends at {length:.1} m but the horizon needs {needed:.1} m")]
    PathTooShort { length: f64, needed: f64 },
    #[error("initial state is not finite: {0:?}")]
    NonFiniteState(KbmState),
    #[error("solver produced a non-finite iterate at iteration {0}")]
    NonFinite(usize),
    #[error("invalid MPC configuration: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcWeights {
    pub q_v: f64,
    pub q_delta: f64,
    pub q_delta_rate: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub q_obs: f64,
    pub q_delta_tol: f64,
}

impl Default for MpcWeights {
    fn default() -> Self {
        Self { q_v: 4.0, q_delta: 10.0, q_delta_rate: 0.2, q_x: 5.0, q_y: 5.0, q_obs: 100.0, q_delta_tol: 1.0e4 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MpcConfig {
    /// Prediction horizon `T_H` (s).
    pub horizon: f64,
    /// Control interval (s).
    pub dt: f64,
    pub weights: MpcWeights,
    pub accel_min: f64,
    pub accel_max: f64,
    pub steer_rate_max: f64,
    /// Lateral deviation from the path beyond which the penalty becomes stiff.
    pub lateral_hard_margin: f64,
    pub longitudinal_hard_margin: f64,
    /// Weight of the stiff penalties (road margins, mechanical steering limit).
    pub hard_weight: f64,
    pub max_iterations: usize,
    pub kkt_tol: f64,
    /// Obstacles whose path station lies in
    /// `[s0 - behind, s0 + reach + ahead]` are considered.
    pub obstacle_behind: f64,
    pub obstacle_ahead: f64,
}

impl Default for MpcConfig {
    fn default() -> Self {
        Self {
            horizon: 3.0,
            dt: 0.2,
            weights: MpcWeights::default(),
            accel_min: -8.0,
            accel_max: 6.0,
            steer_rate_max: 0.5,
            lateral_hard_margin: 3.0,
            longitudinal_hard_margin: 3.0,
            hard_weight: 1e4,
            max_iterations: 10,
            kkt_tol: 1e-6,
            obstacle_behind: 10.0,
            obstacle_ahead: 20.0,
        }
    }
}

impl MpcConfig {
    /// `T_H / dt + 1`
    pub fn stages(&self) -> usize {
        (self.horizon / self.dt).round() as usize + 1
    }

    pub fn validate(&self) -> Result<(), MpcError> {
        let bad = |m: String| Err(MpcError::InvalidConfig(m));
        if !(self.dt > 0.0 && self.horizon >= self.dt) {
            return bad(format!("need 0 < dt <= horizon, got dt={} horizon={}", self.dt, self.horizon));
        }
        let w = &self.weights;
        let all = [w.q_v, w.q_delta, w.q_delta_rate, w.q_x, w.q_y, w.q_obs, w.q_delta_tol, self.hard_weight];
        if all.iter().any(|q| !(q.is_finite() && *q >= 0.0)) {
            return bad("weights must be finite and non-negative".into());
        }
        if !(self.accel_min < 0.0 && self.accel_max > 0.0 && self.steer_rate_max > 0.0) {
            return bad("need accel_min < 0 < accel_max and steer_rate_max > 0".into());
        }
        if !(self.lateral_hard_margin > 0.0 && self.longitudinal_hard_margin > 0.0) {
            return bad("hard margins must be positive".into());
        }
        if self.max_iterations == 0 || !(self.kkt_tol > 0.0) {
            return bad("need max_iterations >= 1 and kkt_tol > 0".into());
        }
        Ok(())
    }

    pub fn lower_bounds(&self) -> [f64; 2] {
        [self.accel_min, -self.steer_rate_max]
    }

    pub fn upper_bounds(&self) -> [f64; 2] {
        [self.accel_max, self.steer_rate_max]
    }
}

/// Stage control with the slack values it induces.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MpcControl {
    pub u1: f64,
    pub u2: f64,
    pub obs_tol: f64,
    pub x_tol: f64,
    pub y_tol: f64,
    pub delta_tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolveDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    pub kkt_residual: f64,
    /// Weighted tracking, smoothness, obstacle and validity cost.
    pub cost: f64,
    /// Stiff penalty for road margins and the mechanical steering limit.
    pub penalty: f64,
    pub wall_time_ms: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlannedTrajectory {
    /// Time of `states[0]`.
    pub t0: f64,
    pub dt: f64,
    pub states: Vec<KbmState>,
    pub controls: Vec<MpcControl>,
    /// Heuristic speed per state.
    pub v_heur: Vec<f64>,
    pub diagnostics: SolveDiagnostics,
}

impl PlannedTrajectory {
    pub fn time(&self, k: usize) -> f64 {
        self.t0 + self.dt * k as f64
    }

    pub fn end_time(&self) -> f64 {
        self.time(self.states.len() - 1)
    }

    pub fn inputs(&self) -> Vec<KbmInput> {
        self.controls.iter().map(|c| KbmInput { accel: c.u1, steer_rate: c.u2 }).collect()
    }

    /// Controls for a new plan starting `shift` stages later, last one repeated.
    pub fn shifted_inputs(&self, shift: usize) -> Vec<KbmInput> {
        let u = self.inputs();
        let n = u.len();
        (0..n).map(|k| u[(k + shift).min(n - 1)]).collect()
    }
}

/// `(u1, u2)` of the first stage.
pub fn first_stage_controls(traj: &PlannedTrajectory) -> (f64, f64) {
    let c = traj.controls[0];
    (c.u1, c.u2)
}
