//! Scale-factor calibration from travel times: drive fixed distances at fixed commanded
//! speeds with the scale factor set to 1, and compare against reference times.

use std::path::Path;

use omninav::world::{SimConfig, World, WorldMap};
use omninav::{BodyTwist, Pose2D};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::output::{read_csv, write_csv};
use crate::seeds::{derive, Stream};
use crate::HarnessError;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReferenceRow {
    /// Travelled distance (m).
    pub distance: f64,
    /// Commanded forward speed (m/s).
    pub speed: f64,
    /// Measured travel time (s).
    pub time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationTrialResult {
    pub reference: ReferenceRow,
    /// Travel time with a unit scale factor.
    pub unit_time: f64,
    /// Travel time with the estimated scale factor.
    pub check_time: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationResult {
    pub scale_factor: f64,
    pub trials: Vec<CalibrationTrialResult>,
}

impl CalibrationResult {
    /// Largest relative deviation of the re-simulated times from the reference.
    pub fn max_relative_error(&self) -> f64 {
        self.trials
            .iter()
            .map(|t| (t.check_time - t.reference.time).abs() / t.reference.time)
            .fold(0.0, f64::max)
    }
}

pub fn validate_reference(rows: &[ReferenceRow]) -> Result<(), HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("reference table is empty".into()));
    }
    for (i, r) in rows.iter().enumerate() {
        let ok = |v: f64| v.is_finite() && v > 0.0;
        if !(ok(r.distance) && ok(r.speed) && ok(r.time)) {
            return Err(HarnessError::Config(format!(
                "reference row {} needs positive distance, speed and time, got ({}, {}, {})",
                i + 1,
                r.distance,
                r.speed,
                r.time
            )));
        }
    }
    Ok(())
}

pub fn read_reference(path: &Path) -> Result<Vec<ReferenceRow>, HarnessError> {
    let rows: Vec<ReferenceRow> = read_csv(path)?;
    validate_reference(&rows)?;
    Ok(rows)
}

pub fn write_reference(path: &Path, rows: &[ReferenceRow]) -> Result<(), HarnessError> {
    write_csv(path, rows.iter().copied())
}

/// World used for the straight-line trials: actuated every step, no scanners.
fn trial_sim(cfg: &ExperimentConfig) -> SimConfig {
    let hz = 1.0 / cfg.calibration.dt;
    SimConfig {
        dt: cfg.calibration.dt,
        act_frequency_hz: hz,
        scan_frequency_hz: hz,
        imu_frequency_hz: hz,
        lidars: Vec::new(),
        ..cfg.sim.clone()
    }
}

/// Time the simulated robot needs to cover `distance` under a constant forward command,
/// with the driver using `scale_factor`. The crossing is interpolated inside the last step.
pub fn simulate_travel_time(
    cfg: &ExperimentConfig,
    scale_factor: f64,
    distance: f64,
    speed: f64,
    seed: u64,
) -> Result<f64, HarnessError> {
    let geometry = cfg
        .geometry
        .build::<f64>()
        .and_then(|g| g.with_scale_factor(scale_factor))
        .map_err(|e| HarnessError::Config(e.to_string()))?;
    let map = WorldMap::empty(distance + 2.0, 2.0).map_err(|e| HarnessError::Config(e.to_string()))?;
    let start = Pose2D::new(1.0, 1.0, 0.0);
    let mut world = World::new(trial_sim(cfg), map, geometry, &[start], seed).map_err(|e| HarnessError::Config(e.to_string()))?;
    let command = BodyTwist::new(speed, 0.0, 0.0);
    // generous bound on the step count; a finished trial exits long before
    let max_steps = (100.0 * distance / speed / cfg.calibration.dt).ceil() as u64 + 1000;
    let mut prev = 0.0;
    for _ in 0..max_steps {
        world.apply_command(0, command).map_err(|e| HarnessError::Config(e.to_string()))?;
        world.step();
        let travelled = world.robots()[0].pose.position().distance(&start.position());
        if travelled >= distance {
            let t = world.clock().t();
            let frac = (distance - prev) / (travelled - prev);
            return Ok(t - world.config().dt * (1.0 - frac));
        }
        if world.collisions(0) > 0 {
            break;
        }
        prev = travelled;
    }
    Err(HarnessError::Config(format!("trial over {distance} m at {speed} m/s did not finish")))
}

/// The simulator's own travel-time table at the configured scale factor.
pub fn emit_reference(cfg: &ExperimentConfig) -> Result<Vec<ReferenceRow>, HarnessError> {
    cfg.calibration
        .trials
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let seed = derive(cfg.seed, Stream::Calibration, &[0, i as u64]);
            let time = simulate_travel_time(cfg, cfg.geometry.scale_factor, t.distance, t.speed, seed)?;
            Ok(ReferenceRow { distance: t.distance, speed: t.speed, time })
        })
        .collect()
}

/// Estimates the scale factor as the mean ratio of unit-scale to reference travel time.
/// Commanded wheel speeds are proportional to the scale factor, so travel time is
/// inversely proportional to it and the ratio is the factor itself.
pub fn calibrate(cfg: &ExperimentConfig, reference: &[ReferenceRow]) -> Result<CalibrationResult, HarnessError> {
    validate_reference(reference)?;
    let mut unit_times = Vec::with_capacity(reference.len());
    for (i, r) in reference.iter().enumerate() {
        let seed = derive(cfg.seed, Stream::Calibration, &[1, i as u64]);
        unit_times.push(simulate_travel_time(cfg, 1.0, r.distance, r.speed, seed)?);
    }
    let scale_factor = reference.iter().zip(&unit_times).map(|(r, u)| u / r.time).sum::<f64>() / reference.len() as f64;
    let mut trials = Vec::with_capacity(reference.len());
    for (i, (r, u)) in reference.iter().zip(&unit_times).enumerate() {
        let seed = derive(cfg.seed, Stream::Calibration, &[2, i as u64]);
        let check_time = simulate_travel_time(cfg, scale_factor, r.distance, r.speed, seed)?;
        trials.push(CalibrationTrialResult { reference: *r, unit_time: *u, check_time });
    }
    Ok(CalibrationResult { scale_factor, trials })
}
