//! Deterministic multi-rate closed loop: plant at 1 kHz, controller at
//! 100 Hz, planner at 10 Hz, with logging, metrics and reports.

mod config;
mod log;
mod metrics;
mod report;
mod runner;
pub mod sweep;

use std::path::Path;

use thiserror::Error;

pub use config::{InitialConditions, ObstacleSettings, ScenarioConfig, SteerAdapter, TimingConfig};
pub use log::{read_steps_csv, step_columns, write_plans_csv, write_steps_csv, Outcome, PlanRecord, SimLog, StepRecord, WALL_TIME_COLUMNS};
pub use metrics::{compute_metrics, Metrics};
pub use report::{emit_report, write_plots};
pub use runner::{run_scenario, Scenario, SimResult};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("{path}: {source}")]
    Csv { path: String, source: csv::Error },
    #[error(transparent)]
    Track(#[from] crate::track::TrackError),
    #[error(transparent)]
    Path(#[from] crate::path::PathError),
    #[error(transparent)]
    Obstacle(#[from] crate::obstacle::ObstacleError),
    #[error(transparent)]
    Plant(#[from] crate::plant::PlantError),
    #[error("plot {path}: {message}")]
    Plot { path: String, message: String },
}

impl SimError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        SimError::Io { path: path.display().to_string(), source }
    }

    pub(crate) fn csv(path: &Path, source: csv::Error) -> Self {
        SimError::Csv { path: path.display().to_string(), source }
    }
}
