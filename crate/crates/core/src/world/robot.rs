use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::lidar::Disc;
use super::map::{ObstacleRef, WorldMap};
use crate::kinematics::{RobotGeometry, WheelSpeeds};
use crate::{BodyTwist, Pose2D};

/// Ground-truth state of one simulated robot.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotState {
    pub id: usize,
    pub pose: Pose2D,
    /// True body twist currently applied by the wheels.
    pub twist: BodyTwist,
    pub footprint_radius: f64,
    /// Latest received command and its receipt time, consumed by the next act tick.
    pub last_command: Option<(BodyTwist, f64)>,
    /// Motor speeds as reported by the encoders.
    pub encoder_speeds: WheelSpeeds<f64>,
}

impl RobotState {
    pub fn new(id: usize, pose: Pose2D, footprint_radius: f64) -> Self {
        Self {
            id,
            pose,
            twist: BodyTwist::zero(),
            footprint_radius,
            last_command: None,
            encoder_speeds: WheelSpeeds::zero(),
        }
    }

    pub fn disc(&self) -> Disc {
        Disc {
            center: self.pose.position(),
            radius: self.footprint_radius,
        }
    }
}

/// How the simulated motors turn commanded rpm into motion.
///
/// `plant_scale` is the scaling constant the simulated drive actually obeys. When the
/// driver's geometry uses the same value, commanded and executed twists coincide.
#[derive(Debug, Clone, PartialEq)]
pub struct Plant {
    pub geometry: RobotGeometry<f64>,
    /// Per-wheel multiplicative slip standard deviation.
    pub slip_sigma: f64,
}

impl Plant {
    pub fn new(driver: &RobotGeometry<f64>, plant_scale: f64, slip_sigma: f64) -> Self {
        Self {
            geometry: driver
                .with_scale_factor(plant_scale)
                .expect("plant scale validated by caller"),
            slip_sigma,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Contact {
    Obstacle(ObstacleRef),
    Robot(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Collision {
    pub robot_id: usize,
    pub contact: Contact,
}

/// Stores an incoming velocity command; later commands overwrite earlier ones.
pub fn apply_command(robot: &RobotState, cmd: BodyTwist, now: f64) -> RobotState {
    let mut next = robot.clone();
    if cmd.is_finite() {
        next.last_command = Some((cmd, now));
    }
    next
}

/// Consumes the stored command: forward kinematics, wheel slip, plant inverse.
/// Without a command the wheels stop. Returns the new state and whether a
/// running motion expired for lack of a fresh command.
pub fn actuate<R: Rng + ?Sized>(
    robot: &RobotState,
    driver: &RobotGeometry<f64>,
    plant: &Plant,
    rng: &mut R,
) -> (RobotState, bool) {
    let mut next = robot.clone();
    match next.last_command.take() {
        Some((cmd, _)) => {
            let speeds = driver.forward(&cmd);
            next.encoder_speeds = speeds;
            let mut actual = speeds.as_array();
            if plant.slip_sigma > 0.0 {
                let slip = Normal::new(0.0, plant.slip_sigma).unwrap();
                for m in actual.iter_mut() {
                    *m *= 1.0 + slip.sample(rng);
                }
            }
            next.twist = plant.geometry.inverse(&WheelSpeeds::from_array(actual));
            (next, false)
        }
        None => {
            let expired = !robot.twist.is_zero();
            next.twist = BodyTwist::zero();
            next.encoder_speeds = WheelSpeeds::zero();
            (next, expired)
        }
    }
}

fn blocking_contact(pose: &Pose2D, radius: f64, map: &WorldMap, others: &[(usize, Disc)]) -> Option<Contact> {
    let p = pose.position();
    let (obs, d) = map.nearest_obstacle(&p);
    if d < radius {
        return Some(Contact::Obstacle(obs));
    }
    others
        .iter()
        .find(|(_, disc)| disc.center.distance(&p) < radius + disc.radius)
        .map(|(id, _)| Contact::Robot(*id))
}

/// Moves the robot by its current twist over `dt` along the exact constant-twist arc.
/// A blocked motion stops at the last collision-free fraction (bisection) and reports the contact.
pub fn advance(
    robot: &RobotState,
    dt: f64,
    map: &WorldMap,
    others: &[(usize, Disc)],
) -> (RobotState, Option<Collision>) {
    let mut next = robot.clone();
    if robot.twist.is_zero() {
        return (next, None);
    }
    let r = robot.footprint_radius;
    let at = |s: f64| robot.pose.compose(&robot.twist.exp(s * dt));
    let target = at(1.0);
    let Some(contact) = blocking_contact(&target, r, map, others) else {
        next.pose = target;
        return (next, None);
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    if blocking_contact(&robot.pose, r, map, others).is_none() {
        for _ in 0..40 {
            let mid = 0.5 * (lo + hi);
            if blocking_contact(&at(mid), r, map, others).is_none() {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        next.pose = at(lo);
    }
    next.twist = BodyTwist::zero();
    (
        next,
        Some(Collision {
            robot_id: robot.id,
            contact,
        }),
    )
}

/// One act-loop iteration followed by motion over `dt`.
pub fn act_tick<R: Rng + ?Sized>(
    robot: &RobotState,
    driver: &RobotGeometry<f64>,
    plant: &Plant,
    dt: f64,
    map: &WorldMap,
    others: &[(usize, Disc)],
    rng: &mut R,
) -> (RobotState, Option<Collision>) {
    let (actuated, _) = actuate(robot, driver, plant, rng);
    advance(&actuated, dt, map, others)
}
