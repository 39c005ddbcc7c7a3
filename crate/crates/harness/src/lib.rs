//! Waypoint navigation experiments on the simulated field: configuration, the run loop
//! that ties localization, planning and control together, CSV and SVG artifacts,
//! timing summaries, scale-factor calibration and a planner comparison.

pub mod calibration;
pub mod config;
pub mod demo;
pub mod experiment;
pub mod output;
pub mod seeds;
pub mod summary;
pub mod svg;
pub mod waypoints;

use omninav::planning::PlanningError;
use thiserror::Error;

pub use config::ExperimentConfig;
pub use experiment::{run_experiment, ExperimentOutput, RunRecord};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("{0}: {1}")]
    Io(String, #[source] std::io::Error),
    #[error("{0}: {1}")]
    Csv(String, String),
    #[error("{0} planner: {1}")]
    Planning(String, #[source] PlanningError),
}
