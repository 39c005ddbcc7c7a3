use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::robot::RobotState;
use crate::geometry::normalize_angle;

/// Gyro noise model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImuConfig {
    /// Constant rate bias (rad/s).
    pub bias: f64,
    /// White noise standard deviation (rad/s for rate, rad for yaw).
    pub sigma: f64,
}

impl Default for ImuConfig {
    fn default() -> Self {
        Self {
            bias: 0.001,
            sigma: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ImuSample {
    pub yaw_rate: f64,
    pub yaw: f64,
    pub timestamp: f64,
    pub bias: f64,
    pub sigma: f64,
}

/// Per-robot gyro state; the bias integrates into a slowly drifting yaw.
#[derive(Debug, Clone, PartialEq)]
pub struct ImuState {
    pub config: ImuConfig,
    pub integrated_bias: f64,
}

impl ImuState {
    pub fn new(config: ImuConfig) -> Self {
        Self {
            config,
            integrated_bias: 0.0,
        }
    }

    pub fn advance(&mut self, dt: f64) {
        self.integrated_bias += self.config.bias * dt;
    }
}

pub fn imu_sample<R: Rng + ?Sized>(
    robot: &RobotState,
    imu: &ImuState,
    timestamp: f64,
    rng: &mut R,
) -> ImuSample {
    let cfg = imu.config;
    let (n_rate, n_yaw) = if cfg.sigma > 0.0 {
        let d = Normal::new(0.0, cfg.sigma).unwrap();
        (d.sample(rng), d.sample(rng))
    } else {
        (0.0, 0.0)
    };
    ImuSample {
        yaw_rate: robot.twist.omega + cfg.bias + n_rate,
        yaw: normalize_angle(robot.pose.theta + imu.integrated_bias + n_yaw),
        timestamp,
        bias: cfg.bias,
        sigma: cfg.sigma,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::{BodyTwist, Pose2D};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn noiseless_yaw_is_true_heading() {
        let robot = RobotState::new(0, Pose2D::new(1.0, 1.0, 0.7), 0.23);
        let imu = ImuState::new(ImuConfig { bias: 0.0, sigma: 0.0 });
        let s = imu_sample(&robot, &imu, 0.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert_eq!(s.yaw, 0.7);
        assert_eq!(s.yaw_rate, 0.0);
    }

    #[test]
    fn bias_drifts_yaw_linearly() {
        let robot = RobotState::new(0, Pose2D::new(1.0, 1.0, 0.0), 0.23);
        let mut imu = ImuState::new(ImuConfig { bias: 0.002, sigma: 0.0 });
        for _ in 0..1000 {
            imu.advance(0.01);
        }
        let s = imu_sample(&robot, &imu, 10.0, &mut ChaCha8Rng::seed_from_u64(1));
        assert!((s.yaw - 0.02).abs() < 1e-12);
    }

    #[test]
    fn stationary_rate_statistics() {
        let mut robot = RobotState::new(0, Pose2D::identity(), 0.23);
        robot.twist = BodyTwist::zero();
        let imu = ImuState::new(ImuConfig { bias: 0.001, sigma: 0.005 });
        let mut rng = ChaCha8Rng::seed_from_u64(99);
        let n = 10_000;
        let xs: Vec<f64> = (0..n).map(|_| imu_sample(&robot, &imu, 0.0, &mut rng).yaw_rate).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        // standard error of the mean is 5e-5
        assert!((mean - 0.001).abs() < 2e-4, "{mean}");
        assert!((var.sqrt() - 0.005).abs() < 0.0003, "{}", var.sqrt());
    }
}
