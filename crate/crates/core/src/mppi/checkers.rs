use serde::{Deserialize, Serialize};

use crate::geometry::angle_diff;
use crate::{BodyTwist, Point2D, Pose2D};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GoalTolerance {
    pub xy: f64,
    pub yaw: f64,
}

impl Default for GoalTolerance {
    fn default() -> Self {
        Self { xy: 0.10, yaw: 0.15 }
    }
}

pub fn goal_checker(estimate: &Pose2D, goal: &Pose2D, tol: &GoalTolerance) -> bool {
    estimate.position().distance(&goal.position()) < tol.xy && angle_diff(estimate.theta, goal.theta).abs() < tol.yaw
}

/// Flags a stall when the robot stays within `min_distance` of an anchor for `window` seconds.
#[derive(Debug, Clone, PartialEq)]
pub struct ProgressChecker {
    pub min_distance: f64,
    pub window: f64,
    anchor: Option<(Point2D, f64)>,
}

impl ProgressChecker {
    pub fn new(min_distance: f64, window: f64) -> Self {
        Self {
            min_distance,
            window,
            anchor: None,
        }
    }

    pub fn reset(&mut self) {
        self.anchor = None;
    }

    /// Feeds one position sample; returns `true` when stalled.
    pub fn check(&mut self, position: &Point2D, t: f64) -> bool {
        match self.anchor {
            Some((p, t0)) if position.distance(&p) < self.min_distance => t - t0 >= self.window,
            _ => {
                self.anchor = Some((*position, t));
                false
            }
        }
    }
}

/// In-place rotation by a fixed angle at constant rate.
#[derive(Debug, Clone, PartialEq)]
pub struct SpinRecovery {
    rate: f64,
    remaining: f64,
}

impl SpinRecovery {
    /// `angle` is signed; the rate is capped at `wz_max`.
    pub fn new(angle: f64, wz_max: f64, rate: f64) -> Self {
        Self {
            rate: rate.abs().min(wz_max) * angle.signum(),
            remaining: angle.abs(),
        }
    }

    pub fn is_done(&self) -> bool {
        self.remaining <= 1e-9
    }

    /// Next command of the script for a tick of length `dt`.
    pub fn step(&mut self, dt: f64) -> BodyTwist {
        if self.is_done() {
            return BodyTwist::zero();
        }
        let full = self.rate.abs() * dt;
        let w = if full <= self.remaining { self.rate } else { self.remaining / dt * self.rate.signum() };
        self.remaining -= full.min(self.remaining);
        BodyTwist::new(0.0, 0.0, w)
    }
}
