//! Navigation stack and deterministic simulator for a three-omniwheel holonomic robot.
//!
//! The kinematic core ([`kinematics`], [`odometry`], [`geometry`]) is generic over the
//! scalar type; the aliases below fix it to `f64`, which the simulator, estimators,
//! planners and controller use throughout.

pub mod geometry;
pub mod kinematics;
pub mod localization;
pub mod mppi;
pub mod odometry;
pub mod planning;
pub mod scalar;
pub mod world;

pub use scalar::Scalar;

pub type Point2D = geometry::Point2<f64>;
pub type Pose2D = geometry::Pose2<f64>;
pub type BodyTwist = geometry::Twist<f64>;
pub type WheelSpeeds = kinematics::WheelSpeeds<f64>;
pub type RobotGeometry = kinematics::RobotGeometry<f64>;
pub type OdometryState = odometry::OdometryState<f64>;
pub type Mat3 = geometry::Mat3<f64>;

pub type Pose2Df32 = geometry::Pose2<f32>;
pub type BodyTwistf32 = geometry::Twist<f32>;
pub type RobotGeometryf32 = kinematics::RobotGeometry<f32>;
