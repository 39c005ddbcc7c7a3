//! Dead-reckoning odometry from wheel encoder speeds, and the ground-truth
//! ("GPS") odometry source read directly from the simulator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Pose2, Twist};
use crate::kinematics::{RobotGeometry, WheelSpeeds};
use crate::scalar::Scalar;
use crate::world::RobotState;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OdometryError {
    #[error("time step must be finite and > 0, got {0}")]
    NonPositiveDt(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OdometrySource {
    WheelEncoders,
    GroundTruth,
}

impl OdometrySource {
    pub fn as_str(&self) -> &'static str {
        match self {
            OdometrySource::WheelEncoders => "wheel_encoders",
            OdometrySource::GroundTruth => "ground_truth",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OdometryState<T> {
    pub pose: Pose2<T>,
    /// Last body-frame velocity.
    pub twist: Twist<T>,
    pub timestamp: T,
    pub source: OdometrySource,
}

impl<T: Scalar> OdometryState<T> {
    pub fn new(pose: Pose2<T>, timestamp: T, source: OdometrySource) -> Self {
        Self {
            pose,
            twist: Twist::zero(),
            timestamp,
            source,
        }
    }
}

fn check_dt<T: Scalar>(dt: T) -> Result<(), OdometryError> {
    if dt.is_finite() && dt > T::zero() {
        Ok(())
    } else {
        Err(OdometryError::NonPositiveDt(dt.to_f64().unwrap_or(f64::NAN)))
    }
}

/// One explicit Euler step: `pose += T_m(θ_prev) · (v_x, v_y, ω) · dt`.
///
/// The rotation is evaluated at the previous heading; no arc correction is applied.
pub fn integrate_odometry<T: Scalar>(
    prev: &Pose2<T>,
    twist: &Twist<T>,
    dt: T,
) -> Result<Pose2<T>, OdometryError> {
    check_dt(dt)?;
    let (s, c) = prev.theta.sin_cos();
    Ok(Pose2::new(
        prev.x + (c * twist.vx - s * twist.vy) * dt,
        prev.y + (s * twist.vx + c * twist.vy) * dt,
        prev.theta + twist.omega * dt,
    ))
}

/// Inverse kinematics on the measured motor speeds, then one integration step.
pub fn update_from_wheels<T: Scalar>(
    state: &OdometryState<T>,
    speeds: &WheelSpeeds<T>,
    geom: &RobotGeometry<T>,
    dt: T,
) -> Result<OdometryState<T>, OdometryError> {
    check_dt(dt)?;
    let twist = geom.inverse(speeds);
    let pose = integrate_odometry(&state.pose, &twist, dt)?;
    Ok(OdometryState {
        pose,
        twist,
        timestamp: state.timestamp + dt,
        source: OdometrySource::WheelEncoders,
    })
}

/// Reads the simulator's exact pose and velocity.
pub fn ground_truth_odometry(robot: &RobotState, timestamp: f64) -> OdometryState<f64> {
    OdometryState {
        pose: robot.pose,
        twist: robot.twist,
        timestamp,
        source: OdometrySource::GroundTruth,
    }
}
