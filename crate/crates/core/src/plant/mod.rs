//! Nine-degree-of-freedom vehicle model: longitudinal, lateral and yaw motion
//! of the carbody, roll and pitch on a linear suspension, and four wheel spins.
//!
//! Wheel order everywhere is front-left, front-right, rear-left, rear-right.
//! The vehicle frame has `x` forward and `y` to the left; roll is positive
//! when the left side rises, pitch positive nose down.

pub mod tire;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::rk4_step;
pub use tire::{slip_ratio, tire_forces, tire_to_vehicle_frame, TireCoefficients};

pub const FL: usize = 0;
pub const FR: usize = 1;
pub const RL: usize = 2;
pub const RR: usize = 3;

const STATE_DIM: usize = 14;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("plant state diverged at t={time:.4}s: {state:?}")]
    Diverged { time: f64, state: Box<PlantState> },
    #[error("invalid plant parameter: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PlantParams {
    pub mass: f64,
    pub inertia_x: f64,
    pub inertia_y: f64,
    pub inertia_z: f64,
    pub wheel_inertia: f64,
    pub l_f: f64,
    pub l_r: f64,
    /// Half track width.
    pub l_w: f64,
    /// CoG height.
    pub h: f64,
    pub r_eff: f64,
    pub k_s: f64,
    pub d_s: f64,
    pub air_density: f64,
    pub drag_coeff: f64,
    pub frontal_area: f64,
    pub mu: f64,
    pub g: f64,
    /// Velocity floor in slip denominators.
    pub eps_v: f64,
    pub tire: TireCoefficients,
}

impl Default for PlantParams {
    fn default() -> Self {
        Self {
            mass: 1500.0,
            inertia_x: 550.0,
            inertia_y: 2400.0,
            inertia_z: 2700.0,
            wheel_inertia: 1.2,
            l_f: 1.2,
            l_r: 1.7,
            l_w: 0.8,
            h: 0.5,
            r_eff: 0.31,
            k_s: 30000.0,
            d_s: 3000.0,
            air_density: 1.225,
            drag_coeff: 0.35,
            frontal_area: 2.2,
            mu: 1.0,
            g: crate::GRAVITY,
            eps_v: 1e-3,
            tire: TireCoefficients::default(),
        }
    }
}

impl PlantParams {
    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let positive = [
            ("mass", self.mass),
            ("inertia_x", self.inertia_x),
            ("inertia_y", self.inertia_y),
            ("inertia_z", self.inertia_z),
            ("wheel_inertia", self.wheel_inertia),
            ("l_f", self.l_f),
            ("l_r", self.l_r),
            ("l_w", self.l_w),
            ("r_eff", self.r_eff),
            ("k_s", self.k_s),
            ("mu", self.mu),
            ("g", self.g),
            ("eps_v", self.eps_v),
            ("tire.nominal_load", self.tire.nominal_load),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(PlantError::InvalidParams(format!("{name} must be positive, got {v}")));
            }
        }
        for (name, v) in [("h", self.h), ("d_s", self.d_s), ("drag_coeff", self.drag_coeff)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(PlantError::InvalidParams(format!("{name} must be non-negative, got {v}")));
            }
        }
        Ok(())
    }

    /// Static normal load on one front and one rear wheel.
    pub fn static_loads(&self) -> (f64, f64) {
        let w = self.mass * self.g / (2.0 * self.wheelbase());
        (w * self.l_r, w * self.l_f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantState {
    pub vx: f64,
    pub vy: f64,
    pub yaw: f64,
    pub yaw_rate: f64,
    pub roll: f64,
    pub roll_rate: f64,
    pub pitch: f64,
    pub pitch_rate: f64,
    pub omega: [f64; 4],
    pub x: f64,
    pub y: f64,
}

impl PlantState {
    /// Straight-line motion at `speed` with free-rolling wheels.
    pub fn rolling(x: f64, y: f64, yaw: f64, speed: f64, r_eff: f64) -> Self {
        Self { vx: speed, yaw, omega: [speed / r_eff; 4], x, y, ..Default::default() }
    }

    pub fn speed(&self) -> f64 {
        self.vx.hypot(self.vy)
    }

    pub fn to_array(&self) -> [f64; STATE_DIM] {
        let w = self.omega;
        [
            self.vx, self.vy, self.yaw, self.yaw_rate, self.roll, self.roll_rate, self.pitch,
            self.pitch_rate, w[0], w[1], w[2], w[3], self.x, self.y,
        ]
    }

    pub fn from_array(a: &[f64; STATE_DIM]) -> Self {
        Self {
            vx: a[0],
            vy: a[1],
            yaw: a[2],
            yaw_rate: a[3],
            roll: a[4],
            roll_rate: a[5],
            pitch: a[6],
            pitch_rate: a[7],
            omega: [a[8], a[9], a[10], a[11]],
            x: a[12],
            y: a[13],
        }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Wheel torques and front road-wheel angle, held over a plant step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlantInput {
    pub torque: [f64; 4],
    pub steer: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct NormalForces {
    pub fz: [f64; 4],
    /// Some wheel would need a negative load and was clamped to zero.
    pub lift: bool,
}

/// Per-wheel force breakdown at one evaluation of the model.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct WheelForces {
    pub slip_ratio: f64,
    pub slip_angle: f64,
    pub fxp: f64,
    pub fyp: f64,
    pub fx: f64,
    pub fy: f64,
    pub fz: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceReport {
    pub wheels: [WheelForces; 4],
    pub lift: bool,
    pub drag: f64,
}

impl ForceReport {
    /// Largest ratio of horizontal tire force to `mu * F_z` over loaded wheels.
    pub fn friction_utilization(&self, mu: f64) -> f64 {
        self.wheels
            .iter()
            .filter(|w| w.fz > 1.0)
            .map(|w| w.fxp.hypot(w.fyp) / (mu * w.fz))
            .fold(0.0, f64::max)
    }
}

/// Suspension travel at each corner, positive in extension.
pub fn suspension_travel(roll: f64, pitch: f64, p: &PlantParams) -> [f64; 4] {
    let (st, sp) = (roll.sin(), pitch.sin());
    [
        p.l_w * st - p.l_f * sp,
        -p.l_w * st - p.l_f * sp,
        p.l_w * st + p.l_r * sp,
        -p.l_w * st + p.l_r * sp,
    ]
}

pub fn normal_forces(roll: f64, roll_rate: f64, pitch: f64, pitch_rate: f64, p: &PlantParams) -> NormalForces {
    let (front, rear) = p.static_loads();
    let zeta = suspension_travel(roll, pitch, p);
    let (tr, pr) = (roll.cos() * roll_rate, pitch.cos() * pitch_rate);
    let zeta_dot = [
        p.l_w * tr - p.l_f * pr,
        -p.l_w * tr - p.l_f * pr,
        p.l_w * tr + p.l_r * pr,
        -p.l_w * tr + p.l_r * pr,
    ];
    let stat = [front, front, rear, rear];
    let mut out = NormalForces::default();
    for i in 0..4 {
        let fz = stat[i] - p.k_s * zeta[i] - p.d_s * zeta_dot[i];
        if fz <= 0.0 {
            out.lift = true;
        }
        out.fz[i] = fz.max(0.0);
    }
    out
}

/// Hub velocity of each wheel in the vehicle frame.
pub fn wheel_velocities(s: &PlantState, p: &PlantParams) -> [(f64, f64); 4] {
    let r = s.yaw_rate;
    let (vyf, vyr) = (s.vy + p.l_f * r, s.vy - p.l_r * r);
    let (vxl, vxr) = (s.vx - p.l_w * r, s.vx + p.l_w * r);
    [(vxl, vyf), (vxr, vyf), (vxl, vyr), (vxr, vyr)]
}

/// Tire slip angles `alpha_i = delta_i - atan2(v_y, v_x)` with `v_x` floored.
pub fn slip_angles(s: &PlantState, steer: f64, p: &PlantParams) -> [f64; 4] {
    let v = wheel_velocities(s, p);
    let mut a = [0.0; 4];
    for i in 0..4 {
        let delta = if i < 2 { steer } else { 0.0 };
        a[i] = delta - v[i].1.atan2(v[i].0.max(p.eps_v));
    }
    a
}

/// Time derivative of the state together with the force breakdown used.
pub fn plant_derivative(s: &PlantState, u: &PlantInput, p: &PlantParams) -> ([f64; STATE_DIM], ForceReport) {
    let nf = normal_forces(s.roll, s.roll_rate, s.pitch, s.pitch_rate, p);
    let vel = wheel_velocities(s, p);
    let alpha = slip_angles(s, u.steer, p);
    let mut rep = ForceReport { lift: nf.lift, ..Default::default() };
    let mut omega_dot = [0.0; 4];
    for i in 0..4 {
        let delta = if i < 2 { u.steer } else { 0.0 };
        let (sd, cd) = delta.sin_cos();
        let v_xp = vel[i].0 * cd + vel[i].1 * sd;
        let tau = slip_ratio(s.omega[i], v_xp, p.r_eff, p.eps_v);
        let fz = nf.fz[i];
        let (fxp, fyp) = tire_forces(tau, alpha[i], fz, p.mu, &p.tire);
        let (fx, fy) = tire_to_vehicle_frame(fxp, fyp, fz, delta, s.roll, s.pitch);
        rep.wheels[i] = WheelForces { slip_ratio: tau, slip_angle: alpha[i], fxp, fyp, fx, fy, fz };
        omega_dot[i] = (u.torque[i] - p.r_eff * fxp) / p.wheel_inertia;
    }
    let w = &rep.wheels;
    let sum_fx = (w[FL].fx + w[FR].fx) + (w[RL].fx + w[RR].fx);
    let sum_fy = (w[FL].fy + w[FR].fy) + (w[RL].fy + w[RR].fy);
    rep.drag = 0.5 * p.air_density * p.drag_coeff * p.frontal_area * s.vx * s.vx.abs();

    let vx_dot = s.yaw_rate * s.vy + (sum_fx - rep.drag) / p.mass;
    let vy_dot = -s.yaw_rate * s.vx + sum_fy / p.mass;
    let yaw_acc = (p.l_f * (w[FL].fy + w[FR].fy) - p.l_r * (w[RL].fy + w[RR].fy)
        + p.l_w * ((w[FR].fx + w[RR].fx) - (w[FL].fx + w[RL].fx)))
        / p.inertia_z;
    let fz = nf.fz;
    let roll_acc = (p.l_w * ((fz[FL] + fz[RL]) - (fz[FR] + fz[RR])) + p.h * sum_fy) / p.inertia_x;
    let pitch_acc = (p.l_r * (fz[RL] + fz[RR]) - p.l_f * (fz[FL] + fz[FR]) - p.h * sum_fx) / p.inertia_y;
    let (sy, cy) = s.yaw.sin_cos();
    let d = [
        vx_dot,
        vy_dot,
        s.yaw_rate,
        yaw_acc,
        s.roll_rate,
        roll_acc,
        s.pitch_rate,
        pitch_acc,
        omega_dot[0],
        omega_dot[1],
        omega_dot[2],
        omega_dot[3],
        s.vx * cy - s.vy * sy,
        s.vx * sy + s.vy * cy,
    ];
    (d, rep)
}

/// One RK4 step with the input held.
pub fn plant_step(s: &PlantState, u: &PlantInput, dt: f64, p: &PlantParams) -> PlantState {
    let x = s.to_array();
    PlantState::from_array(&rk4_step(&x, dt, |x| plant_derivative(&PlantState::from_array(x), u, p).0))
}

/// Plant integrator owning its state and clock.
#[derive(Debug, Clone)]
pub struct VehiclePlant {
    pub params: PlantParams,
    state: PlantState,
    time: f64,
    dt: f64,
    forces: ForceReport,
    accel: [f64; 2],
}

impl VehiclePlant {
    pub fn new(params: PlantParams, state: PlantState, dt: f64) -> Result<Self, PlantError> {
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(PlantError::InvalidParams(format!("step must be positive, got {dt}")));
        }
        let mut plant = Self { params, state, time: 0.0, dt, forces: ForceReport::default(), accel: [0.0; 2] };
        plant.refresh(&PlantInput::default());
        Ok(plant)
    }

    pub fn state(&self) -> &PlantState {
        &self.state
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// Forces at the start of the most recent step.
    pub fn forces(&self) -> &ForceReport {
        &self.forces
    }

    /// Body-frame `(dVx/dt, dVy/dt)` at the start of the most recent step.
    pub fn body_accel(&self) -> [f64; 2] {
        self.accel
    }

    /// Lateral acceleration `V_x * r + dV_y/dt`.
    pub fn lateral_accel(&self) -> f64 {
        self.state.vx * self.state.yaw_rate + self.accel[1]
    }

    fn refresh(&mut self, u: &PlantInput) {
        let (d, rep) = plant_derivative(&self.state, u, &self.params);
        self.forces = rep;
        self.accel = [d[0], d[1]];
    }

    pub fn step(&mut self, u: &PlantInput) -> Result<&PlantState, PlantError> {
        self.refresh(u);
        let next = plant_step(&self.state, u, self.dt, &self.params);
        self.time += self.dt;
        if !next.is_finite() {
            return Err(PlantError::Diverged { time: self.time, state: Box::new(next) });
        }
        self.state = next;
        Ok(&self.state)
    }
}
