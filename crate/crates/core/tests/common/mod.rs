#![allow(dead_code)]

use fmpc_core::kinematic::{KbmInput, KbmParams, KbmState};
use fmpc_core::mpc::{build_problem, MpcConfig, MpcProblem};
use fmpc_core::obstacle::{fit_parabola, FitConfig, Obstacle, ParabolaRegion};
use fmpc_core::path::{Point2, ReferencePath};
use fmpc_core::track::{Segment, TrackSpec};
use fmpc_core::velocity::VelocityPlannerConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn straight(length: f64) -> ReferencePath {
    let pts: Vec<_> = (0..=(length as usize)).map(|i| Point2::new(i as f64, 0.0)).collect();
    ReferencePath::build(&pts, 1.0).unwrap()
}

pub fn square(id: &str, cx: f64, cy: f64, half: f64) -> Obstacle {
    Obstacle::new(
        id,
        vec![
            Point2::new(cx - half, cy - half),
            Point2::new(cx + half, cy - half),
            Point2::new(cx + half, cy + half),
            Point2::new(cx - half, cy + half),
        ],
    )
    .unwrap()
}

pub fn on_path(path: &ReferencePath, s: f64, v: f64) -> KbmState {
    let p = path.point_at(s);
    KbmState { s, x: p.x, y: p.y, v, yaw: path.heading_at(s), steer: 0.0 }
}

/// A small planning problem with its own path kept alive by the caller.
pub struct Instance {
    pub path: ReferencePath,
    pub regions: Vec<ParabolaRegion>,
    pub x0: KbmState,
    pub warm: Vec<KbmInput>,
    pub cfg: MpcConfig,
}

impl Instance {
    pub fn problem(&self) -> MpcProblem<'_> {
        build_problem(
            self.x0,
            &self.path,
            &VelocityPlannerConfig::default(),
            &self.regions,
            &self.warm,
            &KbmParams::default(),
            &self.cfg,
        )
        .unwrap()
    }
}

/// Gentle curve with one obstacle near the path and a perturbed initial state.
pub fn random_instance(seed: u64) -> Instance {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let spec = TrackSpec {
        start: [0.0, 0.0],
        heading_deg: 0.0,
        step: 0.5,
        segments: vec![
            Segment::Straight { length: 10.0 },
            Segment::Arc {
                radius: rng.random_range(30.0..80.0),
                angle_deg: rng.random_range(-60.0..60.0),
                transition: 0.0,
            },
            Segment::Straight { length: 60.0 },
        ],
    };
    let path = ReferencePath::build(&spec.generate().unwrap(), 0.5).unwrap();
    let s0 = rng.random_range(2.0..6.0);
    let p = path.point_at(s0);
    let f = path.frame_at(s0);
    let off = rng.random_range(-0.5..0.5);
    let pos = p + f.normal() * off;
    let x0 = KbmState {
        s: s0,
        x: pos.x,
        y: pos.y,
        v: rng.random_range(5.0..12.0),
        yaw: path.heading_at(s0) + rng.random_range(-0.1..0.1),
        steer: rng.random_range(-0.05..0.05),
    };
    let so = s0 + rng.random_range(8.0..20.0);
    let fo = path.frame_at(so);
    let c = fo.pos + fo.normal() * rng.random_range(-1.5..1.5);
    let obstacle = square("o", c.x, c.y, 0.5);
    let regions = vec![fit_parabola(&obstacle, &path, &FitConfig::default())];
    let cfg = MpcConfig { horizon: 1.0, max_iterations: 200, ..MpcConfig::default() };
    let warm = (0..cfg.stages())
        .map(|_| KbmInput { accel: rng.random_range(-1.0..1.0), steer_rate: rng.random_range(-0.1..0.1) })
        .collect();
    Instance { path, regions, x0, warm, cfg }
}
