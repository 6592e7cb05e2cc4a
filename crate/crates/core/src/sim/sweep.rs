//! Constant-radius cornering tests on the full plant.
//!
//! The vehicle is held on a left-hand circle at constant speed and the
//! steering angle it settles at is compared with the kinematic angle for the
//! same radius.

use serde::{Deserialize, Serialize};

use crate::control::{dispatch_torques, longitudinal_control, Pid, PidGains};
use crate::kinematic::{delta_for_radius, KbmParams};
use crate::path::wrap_angle;
use crate::plant::{PlantError, PlantInput, PlantParams, PlantState, VehiclePlant};
use crate::sim::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CircleTestConfig {
    pub plant: PlantParams,
    pub kinematic: KbmParams,
    pub speed_gains: PidGains,
    /// Gain on the front-axle cross-track error (Stanley law).
    pub cross_track_gain: f64,
    /// Integral gain on the CoG radius error (rad per m s).
    pub radius_integral_gain: f64,
    pub control_dt: f64,
    pub plant_dt: f64,
    pub duration: f64,
    /// Length of the averaging window at the end of the run.
    pub window: f64,
    /// Largest radius error over the window accepted as steady state.
    pub settle_tolerance: f64,
}

impl Default for CircleTestConfig {
    fn default() -> Self {
        Self {
            plant: PlantParams::default(),
            kinematic: KbmParams::default(),
            speed_gains: crate::control::ControllerConfig::default().longitudinal,
            cross_track_gain: 1.0,
            radius_integral_gain: 0.05,
            control_dt: 0.01,
            plant_dt: 1e-3,
            duration: 20.0,
            window: 3.0,
            settle_tolerance: 0.1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CirclePoint {
    pub radius: f64,
    pub speed: f64,
    /// `V^2 / R` at the target speed.
    pub target_accel: f64,
    /// Mean measured lateral acceleration over the window.
    pub lateral_accel: f64,
    /// Mean applied steering angle over the window.
    pub steer: f64,
    pub steer_kinematic: f64,
    /// `abs(steer - steer_kinematic) / steer_kinematic`
    pub mismatch: f64,
    /// Largest CoG radius error over the window.
    pub radius_error: f64,
    pub settled: bool,
}

/// Drives one circle of radius `radius` at `speed` and reports the settled
/// steering angle.
pub fn circle_test(radius: f64, speed: f64, cfg: &CircleTestConfig) -> Result<CirclePoint, SimError> {
    let steer_kin = delta_for_radius(radius, &cfg.kinematic)
        .map_err(|e| SimError::Config(format!("circle radius {radius}: {e}")))?;
    let p = &cfg.plant;
    let sub = (cfg.control_dt / cfg.plant_dt).round().max(1.0) as usize;
    let centre = (0.0, radius);
    let mut plant = VehiclePlant::new(*p, PlantState::rolling(0.0, 0.0, 0.0, speed, p.r_eff), cfg.plant_dt)?;
    let mut pid = Pid::new(cfg.speed_gains);
    let mut integral = 0.0;
    let steer_mech = cfg.kinematic.steer_mech;

    let ticks = (cfg.duration / cfg.control_dt).round() as usize;
    let window_start = ticks.saturating_sub((cfg.window / cfg.control_dt).round() as usize);
    let (mut steer_sum, mut ay_sum, mut n, mut worst) = (0.0, 0.0, 0usize, 0.0_f64);

    for tick in 0..ticks {
        let st = *plant.state();
        let (dx, dy) = (st.x - centre.0, st.y - centre.1);
        let radius_error = dx.hypot(dy) - radius;
        let (fx, fy) = (st.x + p.l_f * st.yaw.cos() - centre.0, st.y + p.l_f * st.yaw.sin() - centre.1);
        let front_error = fx.hypot(fy) - radius;
        let tangent = fy.atan2(fx) + std::f64::consts::FRAC_PI_2;
        let heading_error = wrap_angle(tangent - st.yaw);
        integral += radius_error * cfg.control_dt;
        let steer = (steer_kin
            + heading_error
            + (cfg.cross_track_gain * front_error).atan2(st.vx.abs() + 1.0)
            + cfg.radius_integral_gain * integral)
            .clamp(-steer_mech, steer_mech);
        let force = longitudinal_control(st.speed(), speed, cfg.control_dt, &mut pid);
        let cmd = PlantInput { torque: dispatch_torques(force, p.r_eff), steer };
        for _ in 0..sub {
            plant.step(&cmd).map_err(|e: PlantError| SimError::Plant(e))?;
        }
        if tick >= window_start {
            steer_sum += steer;
            ay_sum += plant.lateral_accel();
            worst = worst.max(radius_error.abs());
            n += 1;
        }
    }
    let n = n.max(1) as f64;
    let steer = steer_sum / n;
    Ok(CirclePoint {
        radius,
        speed,
        target_accel: speed * speed / radius,
        lateral_accel: ay_sum / n,
        steer,
        steer_kinematic: steer_kin,
        mismatch: (steer - steer_kin).abs() / steer_kin,
        radius_error: worst,
        settled: worst <= cfg.settle_tolerance,
    })
}

/// Target speeds giving lateral accelerations `fraction * mu * g` on `radius`.
pub fn speeds_for(radius: f64, fractions: &[f64], mu: f64, g: f64) -> Vec<(f64, f64)> {
    fractions.iter().map(|&f| (radius, (f * mu * g * radius).sqrt())).collect()
}

/// Runs every `(radius, speed)` case; order is preserved.
pub fn circle_sweep(cases: &[(f64, f64)], cfg: &CircleTestConfig) -> Vec<Result<CirclePoint, SimError>> {
    crate::par::map(cases, |&(r, v)| circle_test(r, v, cfg))
}

/// Same as [`circle_sweep`] on a single thread.
pub fn circle_sweep_sequential(cases: &[(f64, f64)], cfg: &CircleTestConfig) -> Vec<Result<CirclePoint, SimError>> {
    crate::par::map_sequential(cases, |&(r, v)| circle_test(r, v, cfg))
}
