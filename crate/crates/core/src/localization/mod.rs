//! Pose estimation: a particle filter scoring lidar endpoints against a likelihood field,
//! and an EKF that integrates odometry twists and corrects heading with the gyro.
//!
//! The two are chained like a `map -> odom -> base` transform tree: the EKF supplies a
//! smooth odometry-frame pose, the particle filter supplies occasional map-frame fixes,
//! and [`Localizer`] keeps the offset between them.

mod ekf;
mod likelihood;
mod particle_filter;

pub use ekf::{ekf_predict, ekf_update_yaw, motion_jacobian, EkfState};
pub use likelihood::{LikelihoodField, SensorModel};
pub use particle_filter::{
    effective_sample_size, normalize_weights, pf_estimate, pf_predict, pf_resample, pf_update, scan_log_likelihood,
    systematic_indices, systematic_resample, MotionNoise, Particle, ParticleFilter, ParticleFilterConfig,
    UpdateOutcome,
};

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::world::{ImuSample, MergedScan};
use crate::{BodyTwist, Mat3, Pose2D};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LocalizationError {
    #[error("time step must be positive, got {0}")]
    NonPositiveDt(f64),
    #[error("measurement noise must be positive, got {0}")]
    NonPositiveNoise(f64),
    #[error("invalid sensor model: {0}")]
    InvalidSensorModel(String),
    #[error("particle filter needs at least one particle")]
    NoParticles,
}

/// Offset that maps odometry-frame poses into the map frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOdomCorrection(pub Pose2D);

impl MapOdomCorrection {
    pub fn identity() -> Self {
        Self(Pose2D::identity())
    }

    /// The correction that makes `odom_pose` land on `map_pose`.
    pub fn from_fix(map_pose: &Pose2D, odom_pose: &Pose2D) -> Self {
        Self(map_pose.compose(&odom_pose.inverse()))
    }

    pub fn apply(&self, odom_pose: &Pose2D) -> Pose2D {
        self.0.compose(odom_pose)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LocalizerConfig {
    pub particle_filter: ParticleFilterConfig,
    pub sensor_model: SensorModel,
    /// Likelihood-field grid spacing (m).
    pub field_resolution: f64,
    /// Half-width of the initial particle box around the start pose (x, y, θ).
    pub initial_spread: [f64; 3],
    /// EKF process noise variance per second on (x, y, θ).
    pub process_noise_rate: [f64; 3],
    /// Heading measurement variance; `None` uses the gyro's sigma squared.
    pub yaw_variance: Option<f64>,
}

impl Default for LocalizerConfig {
    fn default() -> Self {
        Self {
            particle_filter: ParticleFilterConfig::default(),
            sensor_model: SensorModel::default(),
            field_resolution: 0.05,
            initial_spread: [0.1, 0.1, 0.05],
            process_noise_rate: [1e-3, 1e-3, 1e-3],
            yaw_variance: None,
        }
    }
}

/// One robot's estimator pair.
#[derive(Debug, Clone)]
pub struct Localizer {
    pub config: LocalizerConfig,
    pub filter: ParticleFilter,
    pub ekf: EkfState<f64>,
    pub correction: MapOdomCorrection,
    field: Arc<LikelihoodField>,
    rng: ChaCha8Rng,
    last_fix_odom: Option<Pose2D>,
    pf_updates: usize,
}

impl Localizer {
    pub fn new(
        config: LocalizerConfig,
        field: Arc<LikelihoodField>,
        start: Pose2D,
        seed: u64,
    ) -> Result<Self, LocalizationError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let filter = ParticleFilter::uniform_around(config.particle_filter, &start, config.initial_spread, &mut rng)?;
        let s = config.initial_spread;
        Ok(Self {
            config,
            filter,
            ekf: EkfState::new(start, Mat3::diag([s[0] * s[0], s[1] * s[1], s[2] * s[2]])),
            correction: MapOdomCorrection::identity(),
            field,
            rng,
            last_fix_odom: None,
            pf_updates: 0,
        })
    }

    pub fn field(&self) -> &LikelihoodField {
        &self.field
    }

    pub fn predict(&mut self, twist: &BodyTwist, dt: f64) -> Result<(), LocalizationError> {
        let r = self.config.process_noise_rate;
        let q = Mat3::diag([r[0] * dt, r[1] * dt, r[2] * dt]);
        self.ekf = ekf_predict(&self.ekf, twist, dt, &q)?;
        Ok(())
    }

    pub fn observe_yaw(&mut self, imu: &ImuSample) -> Result<(), LocalizationError> {
        let var = self.config.yaw_variance.unwrap_or(imu.sigma * imu.sigma).max(1e-12);
        self.ekf = ekf_update_yaw(&self.ekf, imu.yaw, var)?;
        Ok(())
    }

    /// Runs the particle filter once the odometry-frame pose moved enough since the last fix
    /// (always on the first scan). Returns whether an update happened.
    pub fn observe_scan(&mut self, scan: &MergedScan) -> bool {
        let odom = self.ekf.mean;
        let delta = match self.last_fix_odom {
            Some(prev) => {
                let d = prev.between(&odom);
                if !self.filter.should_update(&d) {
                    return false;
                }
                d
            }
            None => Pose2D::identity(),
        };
        self.filter.predict(&delta, &mut self.rng);
        self.filter.correct(scan, &self.field, &mut self.rng);
        let (fix, _) = self.filter.estimate();
        self.correction = MapOdomCorrection::from_fix(&fix, &odom);
        self.last_fix_odom = Some(odom);
        self.pf_updates += 1;
        true
    }

    /// Map-frame pose: the latest correction applied to the EKF pose.
    pub fn estimate(&self) -> Pose2D {
        self.correction.apply(&self.ekf.mean)
    }

    pub fn particle_covariance(&self) -> Mat3 {
        self.filter.estimate().1
    }

    pub fn pf_updates(&self) -> usize {
        self.pf_updates
    }
}
