//! 100 Hz trajectory tracking: a speed PID producing wheel torques and a
//! steering law combining the planner's steering rate with a yaw PID.

use serde::{Deserialize, Serialize};

use crate::kinematic::KbmState;
use crate::mpc::PlannedTrajectory;
use crate::path::wrap_angle;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    /// Differentiate the measured signal (no kick when the reference jumps).
    Measurement,
    Error,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PidGains {
    pub kp: f64,
    pub ki: f64,
    pub kd: f64,
    /// Bound on the magnitude of the error integral.
    pub integral_limit: f64,
    /// First-order derivative filter time constant (s).
    pub derivative_tau: f64,
    pub derivative_source: DerivativeSource,
}

impl PidGains {
    pub fn validate(&self, name: &str) -> Result<(), String> {
        if [self.kp, self.ki, self.kd, self.derivative_tau].iter().any(|g| !(g.is_finite() && *g >= 0.0)) {
            return Err(format!("{name}: gains and filter constant must be non-negative"));
        }
        if !(self.integral_limit > 0.0) {
            return Err(format!("{name}: integral_limit must be positive"));
        }
        Ok(())
    }
}

/// `u = -K_P e - K_I int(e) - K_D d/dt(signal)`
#[derive(Debug, Clone, PartialEq)]
pub struct Pid {
    pub gains: PidGains,
    integral: f64,
    derivative: f64,
    prev: Option<f64>,
}

impl Pid {
    pub fn new(gains: PidGains) -> Self {
        Self { gains, integral: 0.0, derivative: 0.0, prev: None }
    }

    pub fn integral(&self) -> f64 {
        self.integral
    }

    pub fn reset(&mut self) {
        self.integral = 0.0;
        self.derivative = 0.0;
        self.prev = None;
    }

    /// One update with error `e` and measured signal `y`.
    pub fn update(&mut self, e: f64, y: f64, dt: f64) -> f64 {
        let g = &self.gains;
        let lim = g.integral_limit;
        self.integral = (self.integral + e * dt).clamp(-lim, lim);
        let signal = match g.derivative_source {
            DerivativeSource::Measurement => y,
            DerivativeSource::Error => e,
        };
        if let Some(prev) = self.prev {
            let raw = (signal - prev) / dt;
            self.derivative += (raw - self.derivative) * dt / (g.derivative_tau + dt);
        }
        self.prev = Some(signal);
        -g.kp * e - g.ki * self.integral - g.kd * self.derivative
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Reference {
    pub state: KbmState,
    /// Requested time lies past the end of the trajectory.
    pub stale: bool,
}

/// Linear interpolation of the planned states at time `t`, unwrapping the
/// heading; past either end the boundary state is held.
pub fn interpolate_reference(traj: &PlannedTrajectory, t: f64) -> Reference {
    let n = traj.states.len();
    let x = (t - traj.t0) / traj.dt;
    if x >= (n - 1) as f64 {
        return Reference { state: traj.states[n - 1], stale: x > (n - 1) as f64 };
    }
    if x <= 0.0 {
        return Reference { state: traj.states[0], stale: false };
    }
    let i = x.floor() as usize;
    let u = x - i as f64;
    let (a, b) = (traj.states[i].to_array(), traj.states[i + 1].to_array());
    let mut out = [0.0; 6];
    for k in 0..6 {
        out[k] = a[k] + (b[k] - a[k]) * u;
    }
    out[4] = a[4] + wrap_angle(b[4] - a[4]) * u;
    Reference { state: KbmState::from_array(out), stale: false }
}

/// Total longitudinal force demand (N) from the speed error `V - V_r`.
pub fn longitudinal_control(v: f64, v_ref: f64, dt: f64, pid: &mut Pid) -> f64 {
    pid.update(v - v_ref, v, dt)
}

/// Drive torque on the front wheels, braking torque on all four.
pub fn dispatch_torques(force: f64, r_eff: f64) -> [f64; 4] {
    let total = force * r_eff;
    if total > 0.0 {
        [0.5 * total, 0.5 * total, 0.0, 0.0]
    } else if total < 0.0 {
        [0.25 * total; 4]
    } else {
        [0.0; 4]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ControllerConfig {
    pub longitudinal: PidGains,
    pub lateral: PidGains,
    /// Steering slew limit as a multiple of the planner's steering-rate bound.
    pub steer_rate_factor: f64,
    /// Time after the trajectory end for which it is still followed (s).
    pub stale_grace: f64,
}

impl Default for ControllerConfig {
    fn default() -> Self {
        Self {
            longitudinal: PidGains {
                kp: 12000.0,
                ki: 200.0,
                kd: 50.0,
                integral_limit: 20.0,
                derivative_tau: 0.05,
                derivative_source: DerivativeSource::Measurement,
            },
            lateral: PidGains {
                kp: 0.8,
                ki: 0.05,
                kd: 0.1,
                integral_limit: 1.0,
                derivative_tau: 0.05,
                derivative_source: DerivativeSource::Error,
            },
            steer_rate_factor: 2.0,
            stale_grace: 0.5,
        }
    }
}

impl ControllerConfig {
    pub fn validate(&self) -> Result<(), String> {
        self.longitudinal.validate("control.longitudinal")?;
        self.lateral.validate("control.lateral")?;
        if !(self.steer_rate_factor > 0.0) {
            return Err("control.steer_rate_factor must be positive".into());
        }
        if !(self.stale_grace >= 0.0) {
            return Err("control.stale_grace must be non-negative".into());
        }
        Ok(())
    }
}

/// Steering law `delta = clamp(delta_ol + delta_cl, +-delta_mech)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LateralController {
    pub pid: Pid,
    delta_ol: f64,
    steer_rate: f64,
    last: f64,
    last_cl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct SteeringOutput {
    pub steer: f64,
    pub open_loop: f64,
    pub closed_loop: f64,
    pub yaw_error: f64,
    pub stale: bool,
}

impl LateralController {
    pub fn new(gains: PidGains, initial_steer: f64) -> Self {
        Self { pid: Pid::new(gains), delta_ol: initial_steer, steer_rate: 0.0, last: initial_steer, last_cl: 0.0 }
    }

    /// Re-anchors the open-loop part on a freshly published trajectory.
    pub fn refresh(&mut self, traj: &PlannedTrajectory) {
        self.delta_ol = traj.states[0].steer;
        self.steer_rate = traj.controls[0].u2;
    }

    pub fn last_steer(&self) -> f64 {
        self.last
    }

    pub fn open_loop(&self) -> f64 {
        self.delta_ol
    }

    pub fn last_closed_loop(&self) -> f64 {
        self.last_cl
    }

    /// One control tick at time `t` (the start of the tick). `lookahead` is
    /// the projection time of the yaw error, `max_rate` the slew limit.
    #[allow(clippy::too_many_arguments)]
    pub fn update(
        &mut self,
        traj: &PlannedTrajectory,
        yaw: f64,
        yaw_rate: f64,
        t: f64,
        dt: f64,
        lookahead: f64,
        steer_mech: f64,
        max_rate: f64,
    ) -> SteeringOutput {
        self.delta_ol = (self.delta_ol + self.steer_rate * dt).clamp(-steer_mech, steer_mech);
        let r = interpolate_reference(traj, t + lookahead);
        let projected = yaw + yaw_rate * lookahead;
        let e = wrap_angle(projected - r.state.yaw);
        let cl = self.pid.update(e, projected, dt);
        let raw = (self.delta_ol + cl).clamp(-steer_mech, steer_mech);
        let step = max_rate * dt;
        let steer = raw.clamp(self.last - step, self.last + step);
        self.last = steer;
        self.last_cl = cl;
        SteeringOutput { steer, open_loop: self.delta_ol, closed_loop: cl, yaw_error: e, stale: r.stale }
    }
}
