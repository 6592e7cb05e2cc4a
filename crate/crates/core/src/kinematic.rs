//! Kinematic bicycle model used by the planner, its closed-form steering
//! relations, and the speed-dependent steering limit that keeps lateral
//! acceleration below `0.5 * mu * g`.

use std::f64::consts::FRAC_PI_2;

use nalgebra::SMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::integrate::rk4_step;

pub type StateMatrix = SMatrix<f64, 6, 6>;
pub type InputMatrix = SMatrix<f64, 6, 2>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum KinematicError {
    #[error("steering angle {0} rad is outside (-pi/2, pi/2)")]
    SteeringDomain(f64),
    #[error("turn radius {radius} m must exceed the rear lever arm {l_r} m")]
    RadiusTooSmall { radius: f64, l_r: f64 },
    #[error("invalid kinematic parameters: {0}")]
    InvalidParams(String),
}

/// Planning state `[s, X, Y, V, psi, delta]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KbmState {
    /// Curvilinear abscissa along the reference path (m).
    pub s: f64,
    pub x: f64,
    pub y: f64,
    /// Speed at the centre of gravity (m/s).
    pub v: f64,
    pub yaw: f64,
    /// Front steering angle (rad).
    pub steer: f64,
}

impl KbmState {
    pub fn to_array(&self) -> [f64; 6] {
        [self.s, self.x, self.y, self.v, self.yaw, self.steer]
    }

    pub fn from_array(a: [f64; 6]) -> Self {
        Self { s: a[0], x: a[1], y: a[2], v: a[3], yaw: a[4], steer: a[5] }
    }

    pub fn is_finite(&self) -> bool {
        self.to_array().iter().all(|v| v.is_finite())
    }
}

/// Acceleration and steering rate, held constant over a step.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct KbmInput {
    pub accel: f64,
    pub steer_rate: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct KbmParams {
    pub l_f: f64,
    pub l_r: f64,
    /// Mechanical road-wheel steering limit (rad).
    pub steer_mech: f64,
    pub mu: f64,
    pub g: f64,
}

impl Default for KbmParams {
    fn default() -> Self {
        Self { l_f: 1.2, l_r: 1.7, steer_mech: 0.55, mu: 1.0, g: crate::GRAVITY }
    }
}

impl KbmParams {
    pub fn validate(&self) -> Result<(), KinematicError> {
        let bad = |m: &str| Err(KinematicError::InvalidParams(m.to_string()));
        if !(self.l_f > 0.0 && self.l_r > 0.0) {
            return bad("l_f and l_r must be positive");
        }
        if !(self.mu > 0.0 && self.mu <= 1.2) {
            return bad("mu must lie in (0, 1.2]");
        }
        if !(self.steer_mech > 0.0 && self.steer_mech < FRAC_PI_2) {
            return bad("steer_mech must lie in (0, pi/2)");
        }
        if !(self.g > 0.0) {
            return bad("g must be positive");
        }
        Ok(())
    }

    pub fn wheelbase(&self) -> f64 {
        self.l_f + self.l_r
    }

    /// Lateral acceleration bound `0.5 * mu * g` under which the model is valid.
    pub fn lateral_accel_limit(&self) -> f64 {
        0.5 * self.mu * self.g
    }
}

/// Side-slip angle at the centre of gravity, `atan(tan(delta) l_r / (l_f + l_r))`.
pub fn slip_angle_beta(steer: f64, p: &KbmParams) -> Result<f64, KinematicError> {
    if !(steer.abs() < FRAC_PI_2) {
        return Err(KinematicError::SteeringDomain(steer));
    }
    Ok(beta_unchecked(steer, p))
}

#[inline]
fn beta_unchecked(steer: f64, p: &KbmParams) -> f64 {
    (steer.tan() * p.l_r / p.wheelbase()).atan()
}

/// d(beta)/d(delta)
#[inline]
fn beta_slope(steer: f64, p: &KbmParams) -> f64 {
    let k = p.l_r / p.wheelbase();
    let t = steer.tan();
    k * (1.0 + t * t) / (1.0 + k * k * t * t)
}

/// Lateral acceleration of a kinematic trajectory, `V^2 sin(beta) / l_r`.
pub fn lateral_accel(v: f64, steer: f64, p: &KbmParams) -> f64 {
    v * v * beta_unchecked(steer, p).sin() / p.l_r
}

fn rates(x: &[f64; 6], u: &KbmInput, p: &KbmParams) -> [f64; 6] {
    let (v, yaw, steer) = (x[3], x[4], x[5]);
    let beta = beta_unchecked(steer, p);
    [
        v,
        v * (yaw + beta).cos(),
        v * (yaw + beta).sin(),
        u.accel,
        v / p.l_r * beta.sin(),
        u.steer_rate,
    ]
}

/// Time derivative of the planning state: `[V, V cos(psi+beta), V sin(psi+beta), u1, V/l_r sin(beta), u2]`.
pub fn kbm_derivative(
    state: &KbmState,
    input: &KbmInput,
    p: &KbmParams,
) -> Result<[f64; 6], KinematicError> {
    slip_angle_beta(state.steer, p)?;
    Ok(rates(&state.to_array(), input, p))
}

/// Jacobians of the continuous dynamics with respect to state and input.
fn rate_jacobians(x: &[f64; 6], p: &KbmParams) -> StateMatrix {
    let (v, yaw, steer) = (x[3], x[4], x[5]);
    let beta = beta_unchecked(steer, p);
    let db = beta_slope(steer, p);
    let (sn, cs) = (yaw + beta).sin_cos();
    let mut a = StateMatrix::zeros();
    a[(0, 3)] = 1.0;
    a[(1, 3)] = cs;
    a[(1, 4)] = -v * sn;
    a[(1, 5)] = -v * sn * db;
    a[(2, 3)] = sn;
    a[(2, 4)] = v * cs;
    a[(2, 5)] = v * cs * db;
    a[(4, 3)] = beta.sin() / p.l_r;
    a[(4, 5)] = v / p.l_r * beta.cos() * db;
    a
}

fn input_jacobian() -> InputMatrix {
    let mut b = InputMatrix::zeros();
    b[(3, 0)] = 1.0;
    b[(5, 1)] = 1.0;
    b
}

/// One RK4 step with the input held over `dt`. Speed is clamped at zero
/// afterwards (forward driving only).
pub fn integrate_step(state: &KbmState, input: &KbmInput, dt: f64, p: &KbmParams) -> KbmState {
    let mut next = rk4_step(&state.to_array(), dt, |x| rates(x, input, p));
    next[3] = next[3].max(0.0);
    KbmState::from_array(next)
}

/// [`integrate_step`] together with the exact derivatives of the discrete map,
/// `d(next)/d(state)` and `d(next)/d(input)`, obtained by differentiating
/// through the four RK4 stages.
pub fn integrate_step_with_sensitivity(
    state: &KbmState,
    input: &KbmInput,
    dt: f64,
    p: &KbmParams,
) -> (KbmState, StateMatrix, InputMatrix) {
    let x0 = state.to_array();
    let b = input_jacobian();
    let eye = StateMatrix::identity();
    let h = dt;

    let k1 = rates(&x0, input, p);
    let a1 = rate_jacobians(&x0, p);
    let x2 = crate::integrate::axpy(&x0, 0.5 * h, &k1);
    let k2 = rates(&x2, input, p);
    let a2 = rate_jacobians(&x2, p);
    let x3 = crate::integrate::axpy(&x0, 0.5 * h, &k2);
    let k3 = rates(&x3, input, p);
    let a3 = rate_jacobians(&x3, p);
    let x4 = crate::integrate::axpy(&x0, h, &k3);
    let k4 = rates(&x4, input, p);
    let a4 = rate_jacobians(&x4, p);

    let k1x = a1;
    let k1u = b;
    let k2x = a2 * (eye + 0.5 * h * k1x);
    let k2u = a2 * (0.5 * h * k1u) + b;
    let k3x = a3 * (eye + 0.5 * h * k2x);
    let k3u = a3 * (0.5 * h * k2u) + b;
    let k4x = a4 * (eye + h * k3x);
    let k4u = a4 * (h * k3u) + b;

    let mut phi = eye + (h / 6.0) * (k1x + 2.0 * k2x + 2.0 * k3x + k4x);
    let mut gamma = (h / 6.0) * (k1u + 2.0 * k2u + 2.0 * k3u + k4u);

    let mut next = [0.0; 6];
    for i in 0..6 {
        next[i] = x0[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    }
    if next[3] < 0.0 {
        next[3] = 0.0;
        phi.row_mut(3).fill(0.0);
        gamma.row_mut(3).fill(0.0);
    }
    (KbmState::from_array(next), phi, gamma)
}

/// Kinematic steering angle that produces turn radius `radius` (at the CoG).
pub fn delta_for_radius(radius: f64, p: &KbmParams) -> Result<f64, KinematicError> {
    if !(radius > p.l_r) {
        return Err(KinematicError::RadiusTooSmall { radius, l_r: p.l_r });
    }
    Ok(((p.l_f / p.l_r + 1.0) * (p.l_r / radius).asin().tan()).atan())
}

/// Turn radius (at the CoG) produced by a constant steering angle: `l_r / sin(beta)`.
pub fn radius_for_delta(steer: f64, p: &KbmParams) -> f64 {
    p.l_r / beta_unchecked(steer, p).sin().abs()
}

/// Maximum steering angle at speed `v` that keeps `V^2/R <= 0.5 mu g`,
/// clamped to the mechanical limit.
pub fn delta_max(v: f64, p: &KbmParams) -> f64 {
    let z = p.lateral_accel_limit() * p.l_r / (v * v);
    if !(z < 1.0) {
        return p.steer_mech;
    }
    let w = z / (1.0 - z * z).sqrt();
    ((p.l_f / p.l_r + 1.0) * w).atan().min(p.steer_mech)
}

/// d(delta_max)/dV, zero where the mechanical clamp is active.
pub fn delta_max_slope(v: f64, p: &KbmParams) -> f64 {
    let z = p.lateral_accel_limit() * p.l_r / (v * v);
    if !(z < 1.0) {
        return 0.0;
    }
    let c = p.l_f / p.l_r + 1.0;
    let one_minus = 1.0 - z * z;
    let w = z / one_minus.sqrt();
    if (c * w).atan() >= p.steer_mech {
        return 0.0;
    }
    let dw_dz = one_minus.powf(-1.5);
    let dz_dv = -2.0 * z / v;
    c / (1.0 + c * c * w * w) * dw_dz * dz_dv
}

/// Speed below which every steering angle satisfies the validity bound.
pub fn delta_max_clamp_speed(p: &KbmParams) -> f64 {
    (p.lateral_accel_limit() * p.l_r).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn sym() -> KbmParams {
        KbmParams { l_f: 1.5, l_r: 1.5, ..Default::default() }
    }

    #[test]
    fn beta_values() {
        let p = sym();
        assert_eq!(slip_angle_beta(0.0, &p).unwrap(), 0.0);
        // atan(tan(0.1)/2), mpmath at 30 digits
        assert_relative_eq!(slip_angle_beta(0.1, &p).unwrap(), 0.050_125_313_073_171_44, epsilon = 1e-15);
        for d in [0.01, 0.2, 0.5, 1.2] {
            assert_eq!(slip_angle_beta(-d, &p).unwrap(), -slip_angle_beta(d, &p).unwrap());
        }
        assert!(matches!(slip_angle_beta(FRAC_PI_2, &p), Err(KinematicError::SteeringDomain(_))));
    }

    #[test]
    fn derivative_values() {
        let p = sym();
        let s = KbmState { v: 10.0, ..Default::default() };
        let d = kbm_derivative(&s, &KbmInput::default(), &p).unwrap();
        assert_eq!(d, [10.0, 10.0, 0.0, 0.0, 0.0, 0.0]);

        let still = KbmState { steer: 0.4, yaw: 1.0, ..Default::default() };
        let d = kbm_derivative(&still, &KbmInput { accel: 1.0, steer_rate: 0.1 }, &p).unwrap();
        assert_eq!(&d[..3], &[0.0, 0.0, 0.0]);
        assert_eq!(d[4], 0.0);

        let turning = KbmState { v: 10.0, steer: 0.1, ..Default::default() };
        let d = kbm_derivative(&turning, &KbmInput::default(), &p).unwrap();
        // (10/1.5) * sin(atan(tan(0.1)/2)), mpmath
        assert_relative_eq!(d[4], 0.33402883561594026, epsilon = 1e-14);
    }

    #[test]
    fn straight_advance_and_exact_speed_ramp() {
        let p = KbmParams::default();
        let s0 = KbmState { v: 12.0, ..Default::default() };
        let s1 = integrate_step(&s0, &KbmInput::default(), 0.2, &p);
        assert_relative_eq!(s1.x, 2.4, epsilon = 1e-12);
        assert_relative_eq!(s1.s, 2.4, epsilon = 1e-12);
        assert_eq!(s1.v, 12.0);
        let s2 = integrate_step(&s0, &KbmInput { accel: 1.0, steer_rate: 0.0 }, 0.2, &p);
        assert_relative_eq!(s2.v, 12.2, epsilon = 1e-14);
    }

    #[test]
    fn speed_never_negative() {
        let p = KbmParams::default();
        let s0 = KbmState { v: 0.5, ..Default::default() };
        let s1 = integrate_step(&s0, &KbmInput { accel: -8.0, steer_rate: 0.0 }, 0.2, &p);
        assert_eq!(s1.v, 0.0);
    }

    #[test]
    fn constant_steer_traces_circle_and_closes() {
        let p = KbmParams::default();
        let steer = 0.2;
        let radius = radius_for_delta(steer, &p);
        let v = 5.0;
        let s0 = KbmState { v, steer, ..Default::default() };
        let beta = slip_angle_beta(steer, &p).unwrap();
        // centre lies to the left of the velocity direction at the CoG
        let (cx, cy) = (-radius * beta.sin(), radius * beta.cos());
        let lap_time = 2.0 * std::f64::consts::PI * radius / v;
        let dt = 1e-3;
        let n = (lap_time / dt).floor() as usize;
        let mut s = s0;
        let mut max_dev: f64 = 0.0;
        for _ in 0..n {
            s = integrate_step(&s, &KbmInput::default(), dt, &p);
            let r = ((s.x - cx).powi(2) + (s.y - cy).powi(2)).sqrt();
            max_dev = max_dev.max((r - radius).abs());
        }
        s = integrate_step(&s, &KbmInput::default(), lap_time - n as f64 * dt, &p);
        let closure = (s.x.powi(2) + s.y.powi(2)).sqrt();
        assert!(closure < 1e-6, "closure {closure}");
        assert!(max_dev < 1e-9, "radius drift {max_dev}");
    }

    #[test]
    fn delta_for_radius_values() {
        let p = KbmParams::default();
        assert!(delta_for_radius(1e9, &p).unwrap() < 1e-8);
        // atan(1.70588235 * tan(asin(0.17))), mpmath
        assert_relative_eq!(delta_for_radius(10.0, &p).unwrap(), 0.286_204_150_454_551_3, epsilon = 1e-14);
        assert!(matches!(delta_for_radius(1.7, &p), Err(KinematicError::RadiusTooSmall { .. })));
    }

    #[test]
    fn delta_for_radius_inverts_beta() {
        let p = KbmParams::default();
        for i in 1..50 {
            let d = p.steer_mech * i as f64 / 50.0;
            let r = radius_for_delta(d, &p);
            assert!((delta_for_radius(r, &p).unwrap() - d).abs() < 1e-9);
        }
    }

    #[test]
    fn delta_max_values() {
        let p = KbmParams::default();
        assert_eq!(delta_max(0.0, &p), p.steer_mech);
        // atan(1.70588 * tan(asin(0.03706))), mpmath
        assert_relative_eq!(delta_max(15.0, &p), 0.06317926236982312, epsilon = 1e-14);
        let mut prev = f64::INFINITY;
        let mut v = delta_max_clamp_speed(&p);
        while v < 60.0 {
            let d = delta_max(v, &p);
            assert!(d <= prev);
            prev = d;
            v += 0.25;
        }
    }

    #[test]
    fn delta_max_is_the_lateral_accel_bound() {
        let p = KbmParams::default();
        for v in [5.5, 7.0, 10.0, 15.0, 25.0] {
            let ay = lateral_accel(v, delta_max(v, &p), &p);
            assert_relative_eq!(ay, p.lateral_accel_limit(), max_relative = 1e-12);
        }
    }

    #[test]
    fn delta_max_slope_matches_finite_difference() {
        let p = KbmParams::default();
        for v in [3.5, 6.0, 12.0, 20.0] {
            let h = 1e-6;
            let fd = (delta_max(v + h, &p) - delta_max(v - h, &p)) / (2.0 * h);
            assert_relative_eq!(delta_max_slope(v, &p), fd, max_relative = 1e-6);
        }
    }

    #[test]
    fn step_sensitivity_matches_finite_difference() {
        let p = KbmParams::default();
        let s = KbmState { s: 3.0, x: 1.0, y: -2.0, v: 9.0, yaw: 0.4, steer: 0.15 };
        let u = KbmInput { accel: 1.5, steer_rate: -0.2 };
        let dt = 0.2;
        let (_, phi, gamma) = integrate_step_with_sensitivity(&s, &u, dt, &p);
        let h = 1e-6;
        for j in 0..6 {
            let mut a = s.to_array();
            let mut b = s.to_array();
            a[j] += h;
            b[j] -= h;
            let fa = integrate_step(&KbmState::from_array(a), &u, dt, &p).to_array();
            let fb = integrate_step(&KbmState::from_array(b), &u, dt, &p).to_array();
            for i in 0..6 {
                let fd = (fa[i] - fb[i]) / (2.0 * h);
                assert!((phi[(i, j)] - fd).abs() < 1e-7, "phi[{i},{j}] {} vs {fd}", phi[(i, j)]);
            }
        }
        for j in 0..2 {
            let mut ua = u;
            let mut ub = u;
            if j == 0 {
                ua.accel += h;
                ub.accel -= h;
            } else {
                ua.steer_rate += h;
                ub.steer_rate -= h;
            }
            let fa = integrate_step(&s, &ua, dt, &p).to_array();
            let fb = integrate_step(&s, &ub, dt, &p).to_array();
            for i in 0..6 {
                let fd = (fa[i] - fb[i]) / (2.0 * h);
                assert!((gamma[(i, j)] - fd).abs() < 1e-7);
            }
        }
    }

    #[test]
    fn sensitivity_step_agrees_with_plain_step() {
        let p = KbmParams::default();
        let s = KbmState { v: 14.0, yaw: -0.3, steer: 0.05, ..Default::default() };
        let u = KbmInput { accel: -2.0, steer_rate: 0.3 };
        let a = integrate_step(&s, &u, 0.2, &p);
        let (b, _, _) = integrate_step_with_sensitivity(&s, &u, 0.2, &p);
        assert_eq!(a, b);
    }
}
