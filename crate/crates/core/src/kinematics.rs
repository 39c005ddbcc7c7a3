//! Forward and inverse kinematics of the three-omniwheel drive.
//!
//! Wheel motor speeds (rpm) are obtained from a body twist as
//!
//! ```text
//! ω_M = K · (v_x, v_y, ω) · (1/r) · (60/2π) · gear · S_c
//! ```
//!
//! where row `i` of `K` is `[-sin δ_i, cos δ_i, R_i]`. The inverse applies `K⁻¹`
//! and the reciprocal unit chain. `K⁻¹` is computed once when the geometry is built.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{Mat3, Twist};
use crate::scalar::Scalar;

/// Default wheel angles of the Robotino drive, in degrees.
pub const DEFAULT_WHEEL_ANGLES_DEG: [f64; 3] = [60.0, 180.0, 300.0];
pub const DEFAULT_WHEEL_DISTANCE_M: f64 = 0.18;
pub const DEFAULT_WHEEL_RADIUS_M: f64 = 0.040;
pub const DEFAULT_GEAR_RATIO: f64 = 16.0;
pub const DEFAULT_SCALE_FACTOR: f64 = 0.009375;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum KinematicsError {
    #[error("{name} must be finite and > 0, got {value}")]
    NonPositive { name: &'static str, value: f64 },
    #[error("wheel angles must be finite")]
    NonFiniteAngle,
    #[error("kinematic matrix is singular (|det K| = {det:e})")]
    Singular { det: f64 },
}

/// Motor speeds `(ω_M1, ω_M2, ω_M3)` in rpm.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WheelSpeeds<T> {
    pub m1: T,
    pub m2: T,
    pub m3: T,
}

impl<T: Scalar> WheelSpeeds<T> {
    pub fn new(m1: T, m2: T, m3: T) -> Self {
        Self { m1, m2, m3 }
    }

    pub fn zero() -> Self {
        Self::new(T::zero(), T::zero(), T::zero())
    }

    pub fn as_array(&self) -> [T; 3] {
        [self.m1, self.m2, self.m3]
    }

    pub fn from_array(a: [T; 3]) -> Self {
        Self::new(a[0], a[1], a[2])
    }

    pub fn is_finite(&self) -> bool {
        self.as_array().iter().all(|v| v.is_finite())
    }
}

/// Drive geometry plus the cached kinematic matrix and its inverse.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotGeometry<T> {
    wheel_angles: [T; 3],
    wheel_radii: [T; 3],
    wheel_radius: T,
    gear_ratio: T,
    scale_factor: T,
    k: Mat3<T>,
    k_inv: Mat3<T>,
}

fn positive<T: Scalar>(name: &'static str, v: T) -> Result<(), KinematicsError> {
    if v.is_finite() && v > T::zero() {
        Ok(())
    } else {
        Err(KinematicsError::NonPositive {
            name,
            value: v.to_f64().unwrap_or(f64::NAN),
        })
    }
}

impl<T: Scalar> RobotGeometry<T> {
    /// Angles in radians, lengths in meters.
    pub fn new(
        wheel_angles: [T; 3],
        wheel_radii: [T; 3],
        wheel_radius: T,
        gear_ratio: T,
        scale_factor: T,
    ) -> Result<Self, KinematicsError> {
        if wheel_angles.iter().any(|a| !a.is_finite()) {
            return Err(KinematicsError::NonFiniteAngle);
        }
        for r in wheel_radii {
            positive("wheel distance", r)?;
        }
        positive("wheel radius", wheel_radius)?;
        positive("gear ratio", gear_ratio)?;
        positive("scale factor", scale_factor)?;

        let mut rows = [[T::zero(); 3]; 3];
        for (row, (delta, radius)) in rows.iter_mut().zip(wheel_angles.iter().zip(wheel_radii)) {
            let (s, c) = delta.sin_cos();
            *row = [-s, c, radius];
        }
        let k = Mat3(rows);
        let det = k.determinant();
        if !(det.abs() > T::lit(1e-9)) {
            return Err(KinematicsError::Singular {
                det: det.to_f64().unwrap_or(f64::NAN),
            });
        }
        let k_inv = k.inverse().ok_or(KinematicsError::Singular {
            det: det.to_f64().unwrap_or(f64::NAN),
        })?;
        Ok(Self {
            wheel_angles,
            wheel_radii,
            wheel_radius,
            gear_ratio,
            scale_factor,
            k,
            k_inv,
        })
    }

    /// Uniform wheel distance shortcut with angles given in degrees.
    pub fn uniform_deg(
        angles_deg: [T; 3],
        wheel_distance: T,
        wheel_radius: T,
        gear_ratio: T,
        scale_factor: T,
    ) -> Result<Self, KinematicsError> {
        Self::new(
            angles_deg.map(|a| a.to_radians()),
            [wheel_distance; 3],
            wheel_radius,
            gear_ratio,
            scale_factor,
        )
    }

    /// Robotino layout: wheels at 60°/180°/300°, R = 0.18 m, r = 0.04 m, 16:1, S_c = 0.009375.
    pub fn robotino() -> Self {
        Self::uniform_deg(
            DEFAULT_WHEEL_ANGLES_DEG.map(T::lit),
            T::lit(DEFAULT_WHEEL_DISTANCE_M),
            T::lit(DEFAULT_WHEEL_RADIUS_M),
            T::lit(DEFAULT_GEAR_RATIO),
            T::lit(DEFAULT_SCALE_FACTOR),
        )
        .expect("default geometry is valid")
    }

    pub fn with_scale_factor(&self, scale_factor: T) -> Result<Self, KinematicsError> {
        Self::new(
            self.wheel_angles,
            self.wheel_radii,
            self.wheel_radius,
            self.gear_ratio,
            scale_factor,
        )
    }

    pub fn wheel_angles(&self) -> [T; 3] {
        self.wheel_angles
    }

    pub fn wheel_radii(&self) -> [T; 3] {
        self.wheel_radii
    }

    pub fn wheel_radius(&self) -> T {
        self.wheel_radius
    }

    pub fn gear_ratio(&self) -> T {
        self.gear_ratio
    }

    pub fn scale_factor(&self) -> T {
        self.scale_factor
    }

    pub fn kinematic_matrix(&self) -> Mat3<T> {
        self.k
    }

    pub fn inverse_kinematic_matrix(&self) -> Mat3<T> {
        self.k_inv
    }

    /// `(1/r) · (60/2π) · gear · S_c`: converts a wheel-rim speed (m/s) into motor rpm.
    pub fn rpm_gain(&self) -> T {
        let sixty = T::lit(60.0);
        let two_pi = T::PI() + T::PI();
        sixty / two_pi * self.gear_ratio * self.scale_factor / self.wheel_radius
    }

    pub fn forward(&self, cmd: &Twist<T>) -> WheelSpeeds<T> {
        let g = self.rpm_gain();
        WheelSpeeds::from_array(self.k.mul_vec(cmd.as_array()).map(|v| v * g))
    }

    pub fn inverse(&self, speeds: &WheelSpeeds<T>) -> Twist<T> {
        let r = self.wheel_radius;
        let two_pi = T::PI() + T::PI();
        let back = r * two_pi / T::lit(60.0) / self.gear_ratio / self.scale_factor;
        Twist::from_array(self.k_inv.mul_vec(speeds.as_array()).map(|v| v * back))
    }
}

pub fn kinematic_matrix<T: Scalar>(geom: &RobotGeometry<T>) -> Mat3<T> {
    geom.kinematic_matrix()
}

pub fn forward_kinematics<T: Scalar>(geom: &RobotGeometry<T>, cmd: &Twist<T>) -> WheelSpeeds<T> {
    geom.forward(cmd)
}

pub fn inverse_kinematics<T: Scalar>(
    geom: &RobotGeometry<T>,
    speeds: &WheelSpeeds<T>,
) -> Twist<T> {
    geom.inverse(speeds)
}

/// Geometry block of the run-config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeometryConfig {
    pub wheel_angles_deg: [f64; 3],
    pub wheel_distance_m: f64,
    pub wheel_radius_m: f64,
    pub gear_ratio: f64,
    pub scale_factor: f64,
}

impl Default for GeometryConfig {
    fn default() -> Self {
        Self {
            wheel_angles_deg: DEFAULT_WHEEL_ANGLES_DEG,
            wheel_distance_m: DEFAULT_WHEEL_DISTANCE_M,
            wheel_radius_m: DEFAULT_WHEEL_RADIUS_M,
            gear_ratio: DEFAULT_GEAR_RATIO,
            scale_factor: DEFAULT_SCALE_FACTOR,
        }
    }
}

impl GeometryConfig {
    pub fn build<T: Scalar>(&self) -> Result<RobotGeometry<T>, KinematicsError> {
        RobotGeometry::uniform_deg(
            self.wheel_angles_deg.map(T::lit),
            T::lit(self.wheel_distance_m),
            T::lit(self.wheel_radius_m),
            T::lit(self.gear_ratio),
            T::lit(self.scale_factor),
        )
    }
}
