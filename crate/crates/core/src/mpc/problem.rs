//! Residual model of the planning problem.
//!
//! For stage `j` (control `u_j`, resulting state `xi_{j+1}`) the residual
//! block is, in order:
//!
//! | kind          | value                                          |
//! |---------------|------------------------------------------------|
//! | speed         | `sqrt(q_v) (V - V_heur)`                       |
//! | steer         | `sqrt(q_delta) delta`                          |
//! | steer rate    | `sqrt(q_delta_rate) u2`                        |
//! | longitudinal  | `sqrt(q_x) e_lon`                              |
//! | lateral       | `sqrt(q_y) e_lat`                              |
//! | obstacle      | `sqrt(q_obs) max(0, max_o interior_o)`         |
//! | validity      | `sqrt(q_delta_tol) max(0, abs(delta) - delta_max(V))` |
//! | road lateral  | `sqrt(w) max(0, abs(e_lat) - lateral margin)`  |
//! | road long.    | `sqrt(w) max(0, abs(e_lon) - longitudinal margin)` |
//! | steer limit   | `sqrt(w) max(0, abs(delta) - delta_mech)`      |
//!
//! The first seven squared and summed give the planning cost; the last three
//! give the stiff penalty.

use nalgebra::{DMatrix, DVector, Dyn, OMatrix, SMatrix, U6};

use super::{MpcConfig, MpcControl, MpcError};
use crate::kinematic::{delta_max, delta_max_slope, integrate_step, integrate_step_with_sensitivity, KbmInput, KbmParams, KbmState};
use crate::obstacle::ParabolaRegion;
use crate::path::{Point2, ReferencePath};
use crate::velocity::{straight_line_vmax, VelocityPlannerConfig};

pub const RESIDUALS_PER_STAGE: usize = 10;
const SOFT_PER_STAGE: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ResidualKind {
    Speed = 0,
    Steer,
    SteerRate,
    Longitudinal,
    Lateral,
    Obstacle,
    Validity,
    RoadLateral,
    RoadLongitudinal,
    SteerLimit,
}

#[derive(Debug, Clone)]
pub struct MpcProblem<'a> {
    pub x0: KbmState,
    pub path: &'a ReferencePath,
    /// Heuristic speed at `xi_0 .. xi_N`.
    pub v_heur: Vec<f64>,
    pub obstacles: Vec<ParabolaRegion>,
    pub kin: KbmParams,
    pub cfg: MpcConfig,
    pub warm_start: Vec<KbmInput>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    pub states: Vec<KbmState>,
    pub residuals: DVector<f64>,
    pub jacobian: Option<DMatrix<f64>>,
}

impl Evaluation {
    pub fn cost(&self) -> f64 {
        self.split().0
    }

    pub fn penalty(&self) -> f64 {
        self.split().1
    }

    pub fn merit(&self) -> f64 {
        self.residuals.norm_squared()
    }

    fn split(&self) -> (f64, f64) {
        let mut soft = 0.0;
        let mut hard = 0.0;
        for (i, r) in self.residuals.iter().enumerate() {
            if i % RESIDUALS_PER_STAGE < SOFT_PER_STAGE {
                soft += r * r;
            } else {
                hard += r * r;
            }
        }
        (soft, hard)
    }

    /// Gradient of the merit, `2 J^T r`.
    pub fn gradient(&self) -> Option<DVector<f64>> {
        self.jacobian.as_ref().map(|j| 2.0 * j.tr_mul(&self.residuals))
    }
}

/// Longitudinal and lateral offset of `(x, y)` from the path point at `s`,
/// with their derivatives with respect to `(s, x, y)`.
fn road_errors(path: &ReferencePath, s: f64, x: f64, y: f64) -> ([f64; 2], [[f64; 3]; 2]) {
    let f = path.frame_at(s);
    let d = Point2::new(x, y) - f.pos;
    let (t, n) = (f.tangent(), f.normal());
    let (dt, dn) = (f.tangent_rate(), f.normal_rate());
    let e = [d.dot(&t), d.dot(&n)];
    let de = [
        [-f.d1.dot(&t) + d.dot(&dt), t.x, t.y],
        [-f.d1.dot(&n) + d.dot(&dn), n.x, n.y],
    ];
    (e, de)
}

fn hinge(v: f64) -> (f64, f64) {
    if v > 0.0 {
        (v, 1.0)
    } else {
        (0.0, 0.0)
    }
}

impl<'a> MpcProblem<'a> {
    pub fn stages(&self) -> usize {
        self.v_heur.len() - 1
    }

    pub fn dim(&self) -> usize {
        2 * self.stages()
    }

    pub fn lower_bounds(&self) -> DVector<f64> {
        let [a, b] = self.cfg.lower_bounds();
        DVector::from_fn(self.dim(), |i, _| if i % 2 == 0 { a } else { b })
    }

    pub fn upper_bounds(&self) -> DVector<f64> {
        let [a, b] = self.cfg.upper_bounds();
        DVector::from_fn(self.dim(), |i, _| if i % 2 == 0 { a } else { b })
    }

    pub fn warm_vector(&self) -> DVector<f64> {
        let (lo, hi) = (self.lower_bounds(), self.upper_bounds());
        DVector::from_fn(self.dim(), |i, _| {
            let u = self.warm_start.get(i / 2).copied().unwrap_or_default();
            let v = if i % 2 == 0 { u.accel } else { u.steer_rate };
            v.clamp(lo[i], hi[i])
        })
    }

    pub fn rollout(&self, u: &DVector<f64>) -> Vec<KbmState> {
        let mut xs = Vec::with_capacity(self.stages() + 1);
        xs.push(self.x0);
        for k in 0..self.stages() {
            let inp = KbmInput { accel: u[2 * k], steer_rate: u[2 * k + 1] };
            xs.push(integrate_step(&xs[k], &inp, self.cfg.dt, &self.kin));
        }
        xs
    }

    /// Largest obstacle interior value at `(x, y)` and its gradient.
    fn obstacle_value(&self, x: f64, y: f64) -> (f64, Point2) {
        let p = Point2::new(x, y);
        let mut best = (f64::NEG_INFINITY, Point2::zeros());
        for o in &self.obstacles {
            let v = o.interior_value(p);
            if v > best.0 {
                best = (v, o.interior_gradient(p));
            }
        }
        best
    }

    /// Slack values induced by the state reached at the end of a stage.
    pub fn slacks(&self, u1: f64, u2: f64, next: &KbmState) -> MpcControl {
        let (e, _) = road_errors(self.path, next.s, next.x, next.y);
        let obs = if self.obstacles.is_empty() { 0.0 } else { self.obstacle_value(next.x, next.y).0.max(0.0) };
        MpcControl {
            u1,
            u2,
            obs_tol: obs,
            x_tol: e[0].abs(),
            y_tol: e[1].abs(),
            delta_tol: (next.steer.abs() - delta_max(next.v, &self.kin)).max(0.0),
        }
    }

    pub fn evaluate(&self, u: &DVector<f64>, with_jacobian: bool) -> Evaluation {
        let n = self.stages();
        let m = n * RESIDUALS_PER_STAGE;
        let w = &self.cfg.weights;
        let sq = |q: f64| q.sqrt();
        let sw = self.cfg.hard_weight.sqrt();
        let mut r = DVector::zeros(m);
        let mut jac = with_jacobian.then(|| DMatrix::zeros(m, self.dim()));
        let mut sens = OMatrix::<f64, U6, Dyn>::zeros(self.dim());
        let mut states = Vec::with_capacity(n + 1);
        states.push(self.x0);

        for k in 0..n {
            let inp = KbmInput { accel: u[2 * k], steer_rate: u[2 * k + 1] };
            let x = if jac.is_some() {
                let (x, phi, gamma) = integrate_step_with_sensitivity(&states[k], &inp, self.cfg.dt, &self.kin);
                sens = phi * &sens;
                for c in 0..2 {
                    for i in 0..6 {
                        sens[(i, 2 * k + c)] += gamma[(i, c)];
                    }
                }
                x
            } else {
                integrate_step(&states[k], &inp, self.cfg.dt, &self.kin)
            };
            states.push(x);

            // residual values and d(residual)/d(state) rows
            let mut dr = SMatrix::<f64, RESIDUALS_PER_STAGE, 6>::zeros();
            let row = k * RESIDUALS_PER_STAGE;
            let vh = self.v_heur[k + 1];
            r[row] = sq(w.q_v) * (x.v - vh);
            dr[(0, 3)] = sq(w.q_v);
            r[row + 1] = sq(w.q_delta) * x.steer;
            dr[(1, 5)] = sq(w.q_delta);
            r[row + 2] = sq(w.q_delta_rate) * inp.steer_rate;

            let (e, de) = road_errors(self.path, x.s, x.x, x.y);
            for (i, q) in [(3, w.q_x), (4, w.q_y)] {
                let c = i - 3;
                r[row + i] = sq(q) * e[c];
                dr[(i, 0)] = sq(q) * de[c][0];
                dr[(i, 1)] = sq(q) * de[c][1];
                dr[(i, 2)] = sq(q) * de[c][2];
            }

            if !self.obstacles.is_empty() {
                let (g, grad) = self.obstacle_value(x.x, x.y);
                let (h, a) = hinge(g);
                r[row + 5] = sq(w.q_obs) * h;
                dr[(5, 1)] = sq(w.q_obs) * a * grad.x;
                dr[(5, 2)] = sq(w.q_obs) * a * grad.y;
            }

            let sgn = if x.steer >= 0.0 { 1.0 } else { -1.0 };
            let (h, a) = hinge(x.steer.abs() - delta_max(x.v, &self.kin));
            r[row + 6] = sq(w.q_delta_tol) * h;
            dr[(6, 5)] = sq(w.q_delta_tol) * a * sgn;
            dr[(6, 3)] = -sq(w.q_delta_tol) * a * delta_max_slope(x.v, &self.kin);

            for (i, c, margin) in [(7, 1, self.cfg.lateral_hard_margin), (8, 0, self.cfg.longitudinal_hard_margin)] {
                let es = if e[c] >= 0.0 { 1.0 } else { -1.0 };
                let (h, a) = hinge(e[c].abs() - margin);
                r[row + i] = sw * h;
                for j in 0..3 {
                    dr[(i, j)] = sw * a * es * de[c][j];
                }
            }
            let (h, a) = hinge(x.steer.abs() - self.kin.steer_mech);
            r[row + 9] = sw * h;
            dr[(9, 5)] = sw * a * sgn;

            if let Some(j) = jac.as_mut() {
                let block = dr * &sens;
                j.view_mut((row, 0), (RESIDUALS_PER_STAGE, self.dim())).copy_from(&block);
                j[(row + 2, 2 * k + 1)] += sq(w.q_delta_rate);
            }
        }
        Evaluation { states, residuals: r, jacobian: jac }
    }
}

/// Assembles the planning problem for one cycle.
///
/// The heuristic speed of stage `i` is `min(sqrt(0.5 mu g / kappa_max), V_max,
/// V0 + dV)` with the curvature previewed from the stage's station along the
/// warm-start rollout, and `V_max` reduced so the vehicle can stop within the
/// horizon.
pub fn build_problem<'a>(
    x0: KbmState,
    path: &'a ReferencePath,
    velocity: &VelocityPlannerConfig,
    obstacles: &[ParabolaRegion],
    warm_start: &[KbmInput],
    kin: &KbmParams,
    cfg: &MpcConfig,
) -> Result<MpcProblem<'a>, MpcError> {
    cfg.validate()?;
    if !x0.is_finite() {
        return Err(MpcError::NonFiniteState(x0));
    }
    let n = cfg.stages();
    let t_h = n as f64 * cfg.dt;
    let v_cap = straight_line_vmax(velocity, cfg.accel_min, cfg.horizon);
    let reach = v_cap.max(x0.v) * t_h;
    let needed = x0.s + reach;
    if needed > path.total_length() {
        return Err(MpcError::PathTooShort { length: path.total_length(), needed });
    }
    let mut prob = MpcProblem {
        x0,
        path,
        v_heur: vec![0.0; n + 1],
        obstacles: obstacles
            .iter()
            .filter(|o| o.path_s >= x0.s - cfg.obstacle_behind && o.path_s <= needed + cfg.obstacle_ahead)
            .copied()
            .collect(),
        kin: *kin,
        cfg: *cfg,
        warm_start: warm_start.to_vec(),
    };
    let guess = prob.rollout(&prob.warm_vector());
    let v0 = x0.v.max(0.0);
    let preview = (v0 * velocity.t_prev).max(velocity.min_preview);
    for (i, xi) in guess.iter().enumerate() {
        let kappa = path.max_curvature_ahead(xi.s, preview);
        prob.v_heur[i] = velocity.curve_speed(kappa).min(v_cap).min(v0 + velocity.dv);
    }
    Ok(prob)
}
