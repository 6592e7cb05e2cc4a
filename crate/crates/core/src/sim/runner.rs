use std::time::Instant;

use super::config::{ScenarioConfig, SteerAdapter};
use super::log::{Outcome, PlanRecord, SimLog, StepRecord};
use super::metrics::{compute_metrics, Metrics};
use super::SimError;
use crate::control::{dispatch_torques, interpolate_reference, longitudinal_control, LateralController, Pid};
use crate::kinematic::KbmState;
use crate::mpc::{build_problem, solve, MpcError, PlannedTrajectory};
use crate::obstacle::{fit_parabola, read_obstacles_csv, FitConfig, Obstacle, ParabolaRegion};
use crate::path::{Point2, ReferencePath};
use crate::plant::{PlantInput, PlantState, VehiclePlant};
use crate::track::read_track_csv;
use crate::velocity::heuristic_speed;

/// A configuration with its path and obstacles loaded.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub cfg: ScenarioConfig,
    pub path: ReferencePath,
    pub obstacles: Vec<Obstacle>,
}

#[derive(Debug, Clone)]
pub struct SimResult {
    pub log: SimLog,
    pub metrics: Metrics,
}

impl Scenario {
    pub fn load(cfg: ScenarioConfig) -> Result<Self, SimError> {
        let pts = read_track_csv(&cfg.track)?;
        let path = ReferencePath::build(&pts, cfg.path_spacing)?;
        let obstacles = match &cfg.obstacles {
            Some(f) => read_obstacles_csv(f)?,
            None => Vec::new(),
        };
        Ok(Self { cfg, path, obstacles })
    }

    pub fn from_parts(cfg: ScenarioConfig, path: ReferencePath, obstacles: Vec<Obstacle>) -> Self {
        Self { cfg, path, obstacles }
    }

    pub fn regions(&self) -> Vec<ParabolaRegion> {
        let fit = FitConfig { p_min: self.cfg.obstacle.p_min, margin: self.cfg.obstacle.margin };
        self.obstacles.iter().map(|o| fit_parabola(o, &self.path, &fit)).collect()
    }

    fn initial_state(&self) -> PlantState {
        let c = &self.cfg;
        let f = self.path.frame_at(c.initial.s);
        let pos = f.pos + f.normal() * c.initial.lateral_offset;
        let yaw = self.path.heading_at(c.initial.s) + c.initial.heading_offset;
        PlantState::rolling(pos.x, pos.y, yaw, c.initial.speed, c.plant.r_eff)
    }
}

struct Planner<'a> {
    sc: &'a Scenario,
    regions: Vec<ParabolaRegion>,
    traj: Option<PlannedTrajectory>,
    failures: usize,
    cycle: usize,
}

enum PlanStep {
    Published { wall_ms: f64 },
    Failed { wall_ms: f64, error: MpcError },
    EndOfTrack,
}

impl Planner<'_> {
    fn plan(&mut self, x0: KbmState, t: f64) -> PlanStep {
        let c = &self.sc.cfg;
        let start = Instant::now();
        let warm = self.traj.as_ref().map(|tr| tr.shifted_inputs(1)).unwrap_or_default();
        let built = build_problem(x0, &self.sc.path, &c.velocity, &self.regions, &warm, &c.kinematic, &c.mpc);
        let result = match built {
            Err(MpcError::PathTooShort { .. }) => return PlanStep::EndOfTrack,
            Err(e) => Err(e),
            Ok(problem) => solve(&problem, t),
        };
        let wall_ms = start.elapsed().as_secs_f64() * 1e3;
        self.cycle += 1;
        match result {
            Ok(mut tr) => {
                tr.diagnostics.wall_time_ms = wall_ms;
                self.traj = Some(tr);
                self.failures = 0;
                PlanStep::Published { wall_ms }
            }
            Err(error) => {
                self.failures += 1;
                PlanStep::Failed { wall_ms, error }
            }
        }
    }
}

/// Runs the closed loop until the end of the track, the time limit, or an abort.
pub fn run_scenario(sc: &Scenario) -> Result<SimResult, SimError> {
    let c = &sc.cfg;
    c.validate_params()?;
    let dt = c.timing.plant_dt;
    let control_dt = c.control_dt();
    let every_control = c.timing.control_every;
    let every_plan = every_control * c.timing.plan_every;
    let total_steps = (c.duration / dt).round() as usize;
    let steer_mech = c.kinematic.steer_mech;
    let max_rate = c.mpc.steer_rate_max * c.control.steer_rate_factor;
    let brake_force = -c.plant.mass * c.mpc.accel_min.abs();

    let mut plant = VehiclePlant::new(c.plant, sc.initial_state(), dt)?;
    let mut planner = Planner { sc, regions: sc.regions(), traj: None, failures: 0, cycle: 0 };
    let mut lon = Pid::new(c.control.longitudinal);
    let mut lat = LateralController::new(c.control.lateral, 0.0);
    let mut s_hint = c.initial.s;

    let mut steps = Vec::with_capacity(total_steps.min(400_000));
    let mut plans = Vec::new();
    let mut cmd = PlantInput::default();
    let mut rec = StepRecord::default();
    let mut fallback = false;
    let mut outcome = Outcome::TimeUp;
    let mut note = None;

    for step in 0..total_steps {
        let t = step as f64 * dt;
        let st = *plant.state();
        let pos = Point2::new(st.x, st.y);
        let proj = sc.path.project(pos, s_hint);
        s_hint = proj.s;

        rec.planner_tick = false;
        if step % every_plan == 0 && !fallback {
            let steer0 = match c.timing.steer_adapter {
                SteerAdapter::Commanded => lat.last_steer(),
                SteerAdapter::OpenLoop => lat.open_loop(),
            };
            let x0 = KbmState { s: proj.s, x: st.x, y: st.y, v: st.speed(), yaw: st.yaw, steer: steer0 };
            rec.planner_tick = true;
            rec.v_plan = x0.v;
            rec.v_heur = heuristic_speed(x0.v, x0.s, &sc.path, &c.velocity);
            match planner.plan(x0, t) {
                PlanStep::EndOfTrack => {
                    outcome = Outcome::Completed;
                    if let Some(last) = steps.last_mut() {
                        let last: &mut StepRecord = last;
                        last.completed = true;
                    }
                    break;
                }
                PlanStep::Published { wall_ms } => {
                    let tr = planner.traj.as_ref().expect("just published");
                    lat.refresh(tr);
                    let d = tr.diagnostics;
                    rec.mpc_iterations = d.iterations;
                    rec.mpc_converged = d.converged;
                    rec.mpc_kkt = d.kkt_residual;
                    rec.mpc_cost = d.cost;
                    rec.mpc_penalty = d.penalty;
                    rec.mpc_wall_ms = wall_ms;
                    rec.mpc_failed = false;
                    plans.push(PlanRecord { cycle: planner.cycle, trajectory: tr.clone() });
                }
                PlanStep::Failed { wall_ms, error } => {
                    rec.mpc_wall_ms = wall_ms;
                    rec.mpc_failed = true;
                    if planner.failures >= 2 || planner.traj.is_none() {
                        fallback = true;
                        note = Some(format!("planner failed at t={t:.2}s: {error}"));
                    }
                }
            }
        }

        if step % every_control == 0 {
            let stale_limit = planner.traj.as_ref().map_or(f64::NEG_INFINITY, |tr| tr.end_time() + c.control.stale_grace);
            if !fallback && t > stale_limit {
                fallback = true;
                note = Some(format!("trajectory stale at t={t:.2}s"));
            }
            if fallback {
                let steer = lat.last_steer();
                let step_max = max_rate * control_dt;
                let steer = (0.0f64).clamp(steer - step_max, steer + step_max);
                let force = if st.vx > 0.05 { brake_force } else { 0.0 };
                cmd = PlantInput { torque: dispatch_torques(force, c.plant.r_eff), steer };
                lat = LateralController::new(c.control.lateral, steer);
                rec.fallback = true;
            } else {
                let tr = planner.traj.as_ref().expect("trajectory before first control tick");
                let r = interpolate_reference(tr, t);
                let force = longitudinal_control(st.speed(), r.state.v, control_dt, &mut lon);
                let out = lat.update(tr, st.yaw, st.yaw_rate, t, control_dt, c.mpc.dt, steer_mech, max_rate);
                cmd = PlantInput { torque: dispatch_torques(force, c.plant.r_eff), steer: out.steer };
                rec.steer_ol = out.open_loop;
                rec.steer_cl = out.closed_loop;
                rec.yaw_error = out.yaw_error;
                rec.stale = r.stale;
            }
        }

        let planned = planner.traj.as_ref().map(|tr| interpolate_reference(tr, t).state);
        plant.step(&cmd)?;
        let forces = plant.forces();

        rec.t = t;
        rec.vx = st.vx;
        rec.vy = st.vy;
        rec.yaw = st.yaw;
        rec.yaw_rate = st.yaw_rate;
        rec.roll = st.roll;
        rec.roll_rate = st.roll_rate;
        rec.pitch = st.pitch;
        rec.pitch_rate = st.pitch_rate;
        [rec.omega_fl, rec.omega_fr, rec.omega_rl, rec.omega_rr] = st.omega;
        rec.x = st.x;
        rec.y = st.y;
        [rec.torque_fl, rec.torque_fr, rec.torque_rl, rec.torque_rr] = cmd.torque;
        rec.steer = cmd.steer;
        if let Some(r) = planned {
            rec.ref_x = r.x;
            rec.ref_y = r.y;
            rec.ref_v = r.v;
            rec.ref_yaw = r.yaw;
            rec.ref_steer = r.steer;
            let (sy, cy) = r.yaw.sin_cos();
            rec.tracking_error = (st.x - r.x) * -sy + (st.y - r.y) * cy;
        }
        rec.s = proj.s;
        rec.lateral_error = proj.lateral_offset;
        rec.lateral_accel = plant.lateral_accel();
        [rec.fz_fl, rec.fz_fr, rec.fz_rl, rec.fz_rr] = forces.wheels.map(|w| w.fz);
        rec.friction_use = forces.friction_utilization(c.plant.mu);
        rec.wheel_lift = forces.lift;
        rec.clearance = sc.obstacles.iter().map(|o| o.distance(pos)).fold(f64::INFINITY, f64::min);
        steps.push(rec);

        let next = plant.state();
        if next.roll.abs() > c.timing.attitude_limit || next.pitch.abs() > c.timing.attitude_limit {
            outcome = Outcome::Aborted;
            note = Some(format!("attitude limit exceeded at t={t:.3}s (roll {:.3}, pitch {:.3})", next.roll, next.pitch));
            break;
        }
        if fallback && next.vx <= 0.05 {
            outcome = Outcome::Aborted;
            break;
        }
    }
    let metrics = compute_metrics(&steps);
    Ok(SimResult { log: SimLog { steps, plans, outcome, note, plant_dt: dt }, metrics })
}
