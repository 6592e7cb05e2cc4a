//! Tire slip quantities and Magic Formula forces.
//!
//! Combined slip uses the similarity method on stiffness-normalized slips:
//! with `kx = B_x * tau` and `ky = B_y * alpha`, the resultant normalized slip
//! `rho = |(kx, ky)|` is fed back through each pure-slip curve and the result
//! is split along `(kx, ky) / rho`. Because every pure-slip curve is bounded
//! by `D * F_z = mu * F_z`, the resultant never leaves the friction circle.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TireCoefficients {
    pub b_x: f64,
    pub c_x: f64,
    pub e_x: f64,
    pub b_y: f64,
    pub c_y: f64,
    pub e_y: f64,
    /// Fractional drop of the peak friction per unit of relative load above
    /// `nominal_load`, see [`TireCoefficients::peak_friction`].
    pub load_sensitivity: f64,
    /// Reference load `F_z0` (N).
    pub nominal_load: f64,
}

impl Default for TireCoefficients {
    fn default() -> Self {
        Self {
            b_x: 10.0,
            c_x: 1.9,
            e_x: 0.97,
            b_y: 9.0,
            c_y: 1.3,
            e_y: 0.97,
            load_sensitivity: 0.2,
            nominal_load: 4000.0,
        }
    }
}

/// Width of the load-sensitivity blend, as a fraction of the nominal load.
pub const LOAD_BLEND: f64 = 0.1;

impl TireCoefficients {
    /// Peak friction coefficient `D` at load `fz`: linear fall-off above the
    /// nominal load, blended smoothly into `mu` below it (softplus of width
    /// [`LOAD_BLEND`]). Never exceeds `mu`.
    pub fn peak_friction(&self, fz: f64, mu: f64) -> f64 {
        let dfz = (fz - self.nominal_load) / self.nominal_load;
        let x = dfz / LOAD_BLEND;
        let softplus = LOAD_BLEND * (x.max(0.0) + (-x.abs()).exp().ln_1p());
        (mu * (1.0 - self.load_sensitivity * softplus)).max(0.0)
    }
}

/// Longitudinal slip ratio. Traction uses the wheel speed as reference,
/// braking the hub speed; both denominators are floored at `eps_v`.
pub fn slip_ratio(omega: f64, v_xp: f64, r_eff: f64, eps_v: f64) -> f64 {
    let rim = r_eff * omega;
    if rim >= v_xp {
        (rim - v_xp) / (r_eff * omega.abs()).max(eps_v)
    } else {
        (rim - v_xp) / v_xp.abs().max(eps_v)
    }
}

/// `sin(C atan(B x - E (B x - atan(B x))))`
#[inline]
fn magic(x: f64, b: f64, c: f64, e: f64) -> f64 {
    let bx = b * x;
    (c * (bx - e * (bx - bx.atan())).atan()).sin()
}

/// Pure longitudinal force `F_x0(tau)`.
pub fn pure_longitudinal(tau: f64, fz: f64, mu: f64, t: &TireCoefficients) -> f64 {
    t.peak_friction(fz, mu) * fz * magic(tau, t.b_x, t.c_x, t.e_x)
}

/// Pure lateral force `F_y0(alpha)`.
pub fn pure_lateral(alpha: f64, fz: f64, mu: f64, t: &TireCoefficients) -> f64 {
    t.peak_friction(fz, mu) * fz * magic(alpha, t.b_y, t.c_y, t.e_y)
}

/// Combined-slip tire forces `(F_xp, F_yp)` in the tire frame.
pub fn tire_forces(tau: f64, alpha: f64, fz: f64, mu: f64, t: &TireCoefficients) -> (f64, f64) {
    if fz <= 0.0 {
        return (0.0, 0.0);
    }
    let kx = t.b_x * tau;
    let ky = t.b_y * alpha;
    let rho = kx.hypot(ky);
    let d = t.peak_friction(fz, mu) * fz;
    let (fx, fy) = if rho < 1e-12 {
        (t.c_x * d * kx, t.c_y * d * ky)
    } else {
        let fx0 = pure_longitudinal(rho / t.b_x, fz, mu, t);
        let fy0 = pure_lateral(rho / t.b_y, fz, mu, t);
        (fx0 * kx / rho, fy0 * ky / rho)
    };
    let cap = mu * fz;
    let norm = fx.hypot(fy);
    if norm > cap {
        (fx * cap / norm, fy * cap / norm)
    } else {
        (fx, fy)
    }
}

/// Tire-frame forces expressed in the vehicle frame, including the roll and
/// pitch rotations of the carbody.
pub fn tire_to_vehicle_frame(
    fxp: f64,
    fyp: f64,
    fz: f64,
    steer: f64,
    roll: f64,
    pitch: f64,
) -> (f64, f64) {
    let (sd, cd) = steer.sin_cos();
    let (st, ct) = roll.sin_cos();
    let (sp, cp) = pitch.sin_cos();
    let along = fxp * cd - fyp * sd;
    let across = fyp * cd + fxp * sd;
    let fx = along * cp - fz * sp;
    let fy = along * st * sp + across * ct + fz * st * cp;
    (fx, fy)
}
