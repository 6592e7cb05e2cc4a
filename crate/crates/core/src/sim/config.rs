//! Scenario files (TOML). Relative file paths resolve against the directory
//! of the scenario file; unknown keys are rejected at every level.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::control::ControllerConfig;
use crate::kinematic::KbmParams;
use crate::mpc::MpcConfig;
use crate::obstacle::{DEFAULT_MARGIN, DEFAULT_P_MIN};
use crate::path::DEFAULT_SPACING;
use crate::plant::PlantParams;
use crate::velocity::VelocityPlannerConfig;

/// Which steering angle seeds the planner's initial state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SteerAdapter {
    /// The last steering angle sent to the plant.
    Commanded,
    /// The open-loop part of the steering law only.
    OpenLoop,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitialConditions {
    pub speed: f64,
    /// Station on the path where the run starts (m).
    pub s: f64,
    pub lateral_offset: f64,
    pub heading_offset: f64,
}

impl Default for InitialConditions {
    fn default() -> Self {
        Self { speed: 15.0, s: 0.0, lateral_offset: 0.0, heading_offset: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObstacleSettings {
    pub margin: f64,
    pub p_min: f64,
}

impl Default for ObstacleSettings {
    fn default() -> Self {
        Self { margin: DEFAULT_MARGIN, p_min: DEFAULT_P_MIN }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TimingConfig {
    /// Plant integration step (s).
    pub plant_dt: f64,
    /// Plant steps per controller update.
    pub control_every: usize,
    /// Controller updates per planner cycle.
    pub plan_every: usize,
    pub steer_adapter: SteerAdapter,
    /// Roll or pitch magnitude treated as divergence (rad).
    pub attitude_limit: f64,
}

impl Default for TimingConfig {
    fn default() -> Self {
        Self {
            plant_dt: 1e-3,
            control_every: 10,
            plan_every: 10,
            steer_adapter: SteerAdapter::Commanded,
            attitude_limit: 0.15,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    pub track: PathBuf,
    #[serde(default)]
    pub obstacles: Option<PathBuf>,
    #[serde(default = "default_duration")]
    pub duration: f64,
    /// Reserved; the simulation is deterministic.
    #[serde(default)]
    pub seed: u64,
    /// Road friction; when set it overrides `mu` in the plant, planner model
    /// and velocity planner sections.
    #[serde(default)]
    pub mu: Option<f64>,
    #[serde(default = "default_spacing")]
    pub path_spacing: f64,
    #[serde(default)]
    pub initial: InitialConditions,
    #[serde(default)]
    pub plant: PlantParams,
    #[serde(default)]
    pub kinematic: KbmParams,
    #[serde(default)]
    pub mpc: MpcConfig,
    #[serde(default)]
    pub velocity: VelocityPlannerConfig,
    #[serde(default)]
    pub control: ControllerConfig,
    #[serde(default)]
    pub obstacle: ObstacleSettings,
    #[serde(default)]
    pub timing: TimingConfig,
}

fn default_duration() -> f64 {
    200.0
}

fn default_spacing() -> f64 {
    DEFAULT_SPACING
}

impl ScenarioConfig {
    /// Defaults around the given track file.
    pub fn new(track: impl Into<PathBuf>) -> Self {
        Self {
            track: track.into(),
            obstacles: None,
            duration: default_duration(),
            seed: 0,
            mu: None,
            path_spacing: default_spacing(),
            initial: InitialConditions::default(),
            plant: PlantParams::default(),
            kinematic: KbmParams::default(),
            mpc: MpcConfig::default(),
            velocity: VelocityPlannerConfig::default(),
            control: ControllerConfig::default(),
            obstacle: ObstacleSettings::default(),
            timing: TimingConfig::default(),
        }
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, SimError> {
        let p = path.as_ref();
        let text = std::fs::read_to_string(p).map_err(|e| SimError::io(p, e))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| SimError::Config(format!("{}: {e}", p.display())))?;
        let base = p.parent().unwrap_or(Path::new("."));
        cfg.track = base.join(&cfg.track);
        cfg.obstacles = cfg.obstacles.map(|o| base.join(o));
        cfg.apply_mu();
        cfg.validate()?;
        Ok(cfg)
    }

    /// Pushes the shared friction coefficient into every section.
    pub fn apply_mu(&mut self) {
        if let Some(mu) = self.mu {
            self.plant.mu = mu;
            self.kinematic.mu = mu;
            self.velocity.mu = mu;
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.validate_params()?;
        if !self.track.exists() {
            return Err(SimError::Config(format!("track file {} does not exist", self.track.display())));
        }
        if let Some(o) = &self.obstacles {
            if !o.exists() {
                return Err(SimError::Config(format!("obstacle file {} does not exist", o.display())));
            }
        }
        Ok(())
    }

    /// Checks everything except the referenced files.
    pub fn validate_params(&self) -> Result<(), SimError> {
        let err = |m: String| Err(SimError::Config(m));
        if !(self.duration > 0.0) {
            return err(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.path_spacing > 0.0) {
            return err("path_spacing must be positive".into());
        }
        let t = &self.timing;
        if !(t.plant_dt > 0.0) || t.control_every == 0 || t.plan_every == 0 {
            return err("timing: need plant_dt > 0 and non-zero rate dividers".into());
        }
        if !(self.initial.speed >= 0.0) {
            return err("initial.speed must be non-negative".into());
        }
        self.plant.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.kinematic.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.mpc.validate().map_err(|e| SimError::Config(e.to_string()))?;
        self.velocity.validate().map_err(SimError::Config)?;
        self.control.validate().map_err(SimError::Config)?;
        if !(self.obstacle.p_min > 0.0 && self.obstacle.margin >= 0.0) {
            return err("obstacle: need p_min > 0 and margin >= 0".into());
        }
        Ok(())
    }

    /// Controller period (s).
    pub fn control_dt(&self) -> f64 {
        self.timing.plant_dt * self.timing.control_every as f64
    }

    /// Planner period (s).
    pub fn plan_dt(&self) -> f64 {
        self.control_dt() * self.timing.plan_every as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves_relative_paths() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "x,y\n0,0\n1,0\n2,0\n").unwrap();
        let f = dir.path().join("s.toml");
        std::fs::write(&f, "track = \"t.csv\"\nmu = 0.8\n[initial]\nspeed = 12.0\n[mpc.weights]\nq_v = 2.0\n")
            .unwrap();
        let cfg = ScenarioConfig::load(&f).unwrap();
        assert_eq!(cfg.track, dir.path().join("t.csv"));
        assert_eq!(cfg.initial.speed, 12.0);
        assert_eq!(cfg.mpc.weights.q_v, 2.0);
        assert_eq!(cfg.mpc.weights.q_y, 5.0);
        assert_eq!((cfg.plant.mu, cfg.kinematic.mu, cfg.velocity.mu), (0.8, 0.8, 0.8));
        assert!((cfg.plan_dt() - 0.1).abs() < 1e-15);
    }

    #[test]
    fn rejects_unknown_keys() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("t.csv"), "x,y\n0,0\n1,0\n2,0\n").unwrap();
        let f = dir.path().join("s.toml");
        for text in ["track = \"t.csv\"\nspeeed = 1\n", "track = \"t.csv\"\n[mpc]\nhorizn = 3\n", "track = \"t.csv\"\n[plant.tire]\nbx = 3\n"] {
            std::fs::write(&f, text).unwrap();
            assert!(matches!(ScenarioConfig::load(&f), Err(SimError::Config(_))), "{text}");
        }
        std::fs::write(&f, "track = \"missing.csv\"\n").unwrap();
        assert!(ScenarioConfig::load(&f).is_err());
    }
}
