use std::path::{Path, PathBuf};

use omninav::kinematics::GeometryConfig;
use omninav::localization::LocalizerConfig;
use omninav::mppi::MppiParams;
use omninav::odometry::OdometrySource;
use omninav::planning::{CostmapParams, PlannerKind};
use omninav::world::{MapFile, SimConfig, WorldMap};
use serde::{Deserialize, Serialize};

use crate::HarnessError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaypointConfig {
    /// Distance from the machine side to the waypoint (m).
    pub standoff: f64,
    /// Minimum distance between waypoints of one path (m).
    pub min_spacing: f64,
    /// Minimum distance from any obstacle (m).
    pub min_clearance: f64,
    /// Draws allowed before giving up.
    pub attempts: usize,
}

impl Default for WaypointConfig {
    fn default() -> Self {
        Self {
            standoff: 0.45,
            min_spacing: 0.8,
            min_clearance: 0.4,
            attempts: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerConfig {
    pub kind: PlannerKind,
    /// Preferred distance between path and obstacles; dropped when no such path exists.
    pub clearance: Option<f64>,
}

impl Default for PlannerConfig {
    fn default() -> Self {
        Self {
            kind: PlannerKind::ThetaStar,
            clearance: Some(0.3),
        }
    }
}

/// One row of a travel-time table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTrial {
    pub distance: f64,
    pub speed: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CalibrationConfig {
    /// Step of the calibration world (s); the drive is actuated every step.
    pub dt: f64,
    /// Trials used when emitting a reference table.
    pub trials: Vec<CalibrationTrial>,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        let trials = [(1.0, 0.2), (1.0, 0.5), (2.0, 0.3), (2.0, 0.7), (3.0, 0.4), (3.0, 0.6)]
            .into_iter()
            .map(|(distance, speed)| CalibrationTrial { distance, speed })
            .collect();
        Self { dt: 1e-4, trials }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Label written into every output row.
    pub experiment: String,
    /// Map file, relative to the config file. `None` uses the bundled field.
    pub map: Option<PathBuf>,
    pub robots: usize,
    pub paths_per_experiment: usize,
    pub waypoints_per_path: usize,
    pub repetitions: usize,
    pub seed: u64,
    pub output: Option<PathBuf>,
    /// Seconds allowed per leg.
    pub leg_timeout: f64,
    /// Odometry fed to the pose estimator.
    pub odometry_source: OdometrySource,
    /// Std of the position noise on other robots' poses seen by the controller (m).
    pub peer_pose_noise: f64,
    /// Write every n-th step to the trajectory files.
    pub trajectory_stride: usize,
    /// Render one SVG per path.
    pub plots: bool,
    pub waypoints: WaypointConfig,
    pub planner: PlannerConfig,
    pub geometry: GeometryConfig,
    pub sim: SimConfig,
    pub costmap: CostmapParams,
    pub localization: LocalizerConfig,
    pub controller: MppiParams,
    pub calibration: CalibrationConfig,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: "E1".into(),
            map: None,
            robots: 1,
            paths_per_experiment: 5,
            waypoints_per_path: 4,
            repetitions: 5,
            seed: 1,
            output: None,
            leg_timeout: 120.0,
            odometry_source: OdometrySource::GroundTruth,
            peer_pose_noise: 0.02,
            trajectory_stride: 2,
            plots: true,
            waypoints: WaypointConfig::default(),
            planner: PlannerConfig::default(),
            geometry: GeometryConfig::default(),
            sim: SimConfig::default(),
            costmap: CostmapParams::default(),
            localization: LocalizerConfig::default(),
            controller: MppiParams::default(),
            calibration: CalibrationConfig::default(),
            base_dir: PathBuf::from("."),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, HarnessError> {
        let mut cfg: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.base_dir = base_dir.to_path_buf();
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.into()));
        if self.robots == 0 || self.paths_per_experiment == 0 || self.waypoints_per_path == 0 || self.repetitions == 0 {
            return bad("robot, path, waypoint and repetition counts must be at least 1");
        }
        if self.waypoints_per_path < 2 {
            return bad("a path needs at least two waypoints");
        }
        if !(self.leg_timeout > 0.0) {
            return bad("leg_timeout must be positive");
        }
        if self.trajectory_stride == 0 {
            return bad("trajectory_stride must be at least 1");
        }
        if !(self.peer_pose_noise >= 0.0) {
            return bad("peer_pose_noise must be non-negative");
        }
        if !(self.waypoints.standoff > 0.0 && self.waypoints.min_spacing >= 0.0) || self.waypoints.attempts == 0 {
            return bad("invalid waypoint settings");
        }
        if !(self.calibration.dt > 0.0) {
            return bad("calibration dt must be positive");
        }
        self.sim.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        self.controller.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(())
    }

    pub fn load_map(&self) -> Result<WorldMap, HarnessError> {
        match &self.map {
            None => Ok(WorldMap::default_rcll()),
            Some(rel) => load_map_file(&self.base_dir.join(rel)),
        }
    }

    pub fn output_dir(&self) -> PathBuf {
        match &self.output {
            Some(p) => self.base_dir.join(p),
            None => PathBuf::from("out").join(self.experiment.to_lowercase()),
        }
    }
}

pub fn load_map_file(path: &Path) -> Result<WorldMap, HarnessError> {
    let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Io(path.display().to_string(), e))?;
    let file: MapFile = serde_json::from_str(&text).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
    WorldMap::from_file(&file).map_err(|e| HarnessError::Config(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_object_gives_defaults() {
        let cfg = ExperimentConfig::from_json("{}", Path::new(".")).unwrap();
        assert_eq!((cfg.robots, cfg.paths_per_experiment, cfg.waypoints_per_path, cfg.repetitions), (1, 5, 4, 5));
        assert_eq!(cfg.controller.time_steps, 80);
        assert_eq!(cfg.odometry_source, OdometrySource::GroundTruth);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(ExperimentConfig::from_json(r#"{"robots": 0}"#, Path::new(".")).is_err());
        assert!(ExperimentConfig::from_json(r#"{"leg_timeout": -1}"#, Path::new(".")).is_err());
        assert!(ExperimentConfig::from_json(r#"{"controller": {"batch_size": 0}}"#, Path::new(".")).is_err());
        assert!(ExperimentConfig::from_json(r#"{"unknown": 1}"#, Path::new(".")).is_err());
    }
}
