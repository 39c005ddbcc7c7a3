//! Deterministic fixed-step 2D world: field geometry, robots, actuation with
//! command expiry, wheel slip, laser scanners and gyro.

mod imu;
mod lidar;
mod map;
mod robot;

pub use imu::{imu_sample, ImuConfig, ImuSample, ImuState};
pub use lidar::{merge_all, merge_scans, ray_distance, raycast_scan, Disc, LidarSpec, MergedScan, Scan, ScanPoint};
pub use map::{MachineRecord, Machine, MapFile, ObstacleRef, Rect, WorldMap};
pub use robot::{act_tick, actuate, advance, apply_command, Collision, Contact, Plant, RobotState};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kinematics::{RobotGeometry, DEFAULT_SCALE_FACTOR};
use crate::odometry::{ground_truth_odometry, update_from_wheels, OdometrySource, OdometryState};
use crate::kinematics::WheelSpeeds;
use crate::{BodyTwist, Pose2D};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("invalid map: {0}")]
    InvalidMap(String),
    #[error("invalid sensor: {0}")]
    InvalidSensor(String),
    #[error("invalid simulation config: {0}")]
    InvalidConfig(String),
    #[error("scan timestamps differ: {0} vs {1}")]
    TimestampMismatch(f64, f64),
    #[error("robot {0} spawns in collision")]
    SpawnCollision(usize),
    #[error("unknown robot {0}")]
    UnknownRobot(usize),
}

/// Simulation time kept as an integer step count.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimClock {
    pub dt: f64,
    pub step_index: u64,
}

impl SimClock {
    pub fn new(dt: f64) -> Self {
        Self { dt, step_index: 0 }
    }

    pub fn t(&self) -> f64 {
        self.step_index as f64 * self.dt
    }

    pub fn tick(&mut self) {
        self.step_index += 1;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    /// Fixed step (s).
    pub dt: f64,
    pub act_frequency_hz: f64,
    pub scan_frequency_hz: f64,
    pub imu_frequency_hz: f64,
    pub slip_sigma: f64,
    /// Scaling constant obeyed by the simulated drive.
    pub plant_scale: f64,
    pub footprint_radius: f64,
    pub lidars: Vec<LidarSpec>,
    pub imu: ImuConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 0.05,
            act_frequency_hz: 20.0,
            scan_frequency_hz: 20.0,
            imu_frequency_hz: 20.0,
            slip_sigma: 0.02,
            plant_scale: DEFAULT_SCALE_FACTOR,
            footprint_radius: 0.23,
            lidars: LidarSpec::default_pair(),
            imu: ImuConfig::default(),
        }
    }
}

impl SimConfig {
    /// Same layout with every noise source switched off.
    pub fn noiseless(mut self) -> Self {
        self.slip_sigma = 0.0;
        self.imu = ImuConfig { bias: 0.0, sigma: 0.0 };
        for l in &mut self.lidars {
            l.noise_sigma = 0.0;
        }
        self
    }

    /// Number of steps per period of `hz`; must be an integer multiple of `dt`.
    pub fn steps_per(&self, hz: f64) -> Result<u64, SimError> {
        if !(hz > 0.0 && hz.is_finite()) {
            return Err(SimError::InvalidConfig(format!("frequency {hz}")));
        }
        let ratio = 1.0 / (hz * self.dt);
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-6 {
            return Err(SimError::InvalidConfig(format!(
                "period of {hz} Hz is not a multiple of dt = {}",
                self.dt
            )));
        }
        Ok(n as u64)
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(SimError::InvalidConfig(format!("dt {}", self.dt)));
        }
        self.steps_per(self.act_frequency_hz)?;
        self.steps_per(self.scan_frequency_hz)?;
        self.steps_per(self.imu_frequency_hz)?;
        if !(self.slip_sigma >= 0.0) || !(self.plant_scale > 0.0) || !(self.footprint_radius > 0.0) {
            return Err(SimError::InvalidConfig("slip, plant scale or footprint out of range".into()));
        }
        for l in &self.lidars {
            l.validate()?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SimEventKind {
    Collision,
    CommandExpired,
}

impl SimEventKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SimEventKind::Collision => "collision",
            SimEventKind::CommandExpired => "command_expired",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimEvent {
    pub step: u64,
    pub t: f64,
    pub robot_id: usize,
    pub kind: SimEventKind,
    pub detail: String,
}

/// Everything one robot's driver publishes after a step.
#[derive(Debug, Clone, PartialEq)]
pub struct SensorFrame {
    pub robot_id: usize,
    pub t: f64,
    pub wheel_odometry: OdometryState<f64>,
    pub ground_truth: OdometryState<f64>,
    pub encoder_speeds: WheelSpeeds<f64>,
    pub imu: Option<ImuSample>,
    pub scan: Option<MergedScan>,
}

impl SensorFrame {
    pub fn odometry(&self, source: OdometrySource) -> &OdometryState<f64> {
        match source {
            OdometrySource::WheelEncoders => &self.wheel_odometry,
            OdometrySource::GroundTruth => &self.ground_truth,
        }
    }
}

/// One simulated world. Stepping is single-threaded and fully determined by config and seed.
#[derive(Debug, Clone)]
pub struct World {
    config: SimConfig,
    map: WorldMap,
    driver: RobotGeometry<f64>,
    plant: Plant,
    robots: Vec<RobotState>,
    imus: Vec<ImuState>,
    wheel_odometry: Vec<OdometryState<f64>>,
    clock: SimClock,
    act_every: u64,
    scan_every: u64,
    imu_every: u64,
    rng: ChaCha8Rng,
    events: Vec<SimEvent>,
    collision_count: Vec<usize>,
}

impl World {
    pub fn new(
        config: SimConfig,
        map: WorldMap,
        driver: RobotGeometry<f64>,
        spawn: &[Pose2D],
        seed: u64,
    ) -> Result<Self, SimError> {
        config.validate()?;
        let plant = Plant::new(&driver, config.plant_scale, config.slip_sigma);
        let robots: Vec<RobotState> = spawn
            .iter()
            .enumerate()
            .map(|(i, p)| RobotState::new(i, *p, config.footprint_radius))
            .collect();
        for (i, r) in robots.iter().enumerate() {
            let p = r.pose.position();
            let clear = map.distance_to_obstacles(&p) >= r.footprint_radius
                && robots[..i]
                    .iter()
                    .all(|o| o.pose.position().distance(&p) >= o.footprint_radius + r.footprint_radius);
            if !clear || !map.in_field(&p) {
                return Err(SimError::SpawnCollision(i));
            }
        }
        let wheel_odometry = spawn
            .iter()
            .map(|p| OdometryState::new(*p, 0.0, OdometrySource::WheelEncoders))
            .collect();
        Ok(Self {
            act_every: config.steps_per(config.act_frequency_hz)?,
            scan_every: config.steps_per(config.scan_frequency_hz)?,
            imu_every: config.steps_per(config.imu_frequency_hz)?,
            clock: SimClock::new(config.dt),
            imus: vec![ImuState::new(config.imu); robots.len()],
            collision_count: vec![0; robots.len()],
            rng: ChaCha8Rng::seed_from_u64(seed),
            events: Vec::new(),
            wheel_odometry,
            config,
            map,
            driver,
            plant,
            robots,
        })
    }

    pub fn config(&self) -> &SimConfig {
        &self.config
    }

    pub fn map(&self) -> &WorldMap {
        &self.map
    }

    pub fn driver_geometry(&self) -> &RobotGeometry<f64> {
        &self.driver
    }

    pub fn clock(&self) -> SimClock {
        self.clock
    }

    pub fn robots(&self) -> &[RobotState] {
        &self.robots
    }

    pub fn robot(&self, id: usize) -> Option<&RobotState> {
        self.robots.get(id)
    }

    pub fn events(&self) -> &[SimEvent] {
        &self.events
    }

    pub fn drain_events(&mut self) -> Vec<SimEvent> {
        std::mem::take(&mut self.events)
    }

    pub fn collisions(&self, id: usize) -> usize {
        self.collision_count[id]
    }

    /// True when the next `step` begins with an act tick.
    pub fn is_act_step(&self) -> bool {
        self.clock.step_index % self.act_every == 0
    }

    pub fn apply_command(&mut self, id: usize, cmd: BodyTwist) -> Result<(), SimError> {
        let now = self.clock.t();
        let r = self.robots.get_mut(id).ok_or(SimError::UnknownRobot(id))?;
        *r = apply_command(r, cmd, now);
        Ok(())
    }

    pub fn ground_truth(&self, id: usize) -> Option<OdometryState<f64>> {
        self.robots.get(id).map(|r| ground_truth_odometry(r, self.clock.t()))
    }

    fn discs_except(&self, id: usize) -> Vec<(usize, Disc)> {
        self.robots
            .iter()
            .filter(|r| r.id != id)
            .map(|r| (r.id, r.disc()))
            .collect()
    }

    fn log(&mut self, robot_id: usize, kind: SimEventKind, detail: String) {
        self.events.push(SimEvent {
            step: self.clock.step_index,
            t: self.clock.t(),
            robot_id,
            kind,
            detail,
        });
    }

    /// Advances the world by one `dt` and returns one sensor frame per robot.
    pub fn step(&mut self) -> Vec<SensorFrame> {
        let dt = self.clock.dt;
        if self.is_act_step() {
            for i in 0..self.robots.len() {
                let (next, expired) = actuate(&self.robots[i], &self.driver, &self.plant, &mut self.rng);
                self.robots[i] = next;
                if expired {
                    self.log(i, SimEventKind::CommandExpired, "no command within act period".into());
                }
            }
        }
        for i in 0..self.robots.len() {
            let others = self.discs_except(i);
            let (next, collision) = advance(&self.robots[i], dt, &self.map, &others);
            self.robots[i] = next;
            if let Some(c) = collision {
                self.collision_count[i] += 1;
                let detail = match c.contact {
                    Contact::Obstacle(o) => self.map.describe(o),
                    Contact::Robot(j) => format!("robot:{j}"),
                };
                self.log(i, SimEventKind::Collision, detail);
            }
        }
        self.clock.tick();
        let t = self.clock.t();
        let step = self.clock.step_index;

        let mut frames = Vec::with_capacity(self.robots.len());
        for i in 0..self.robots.len() {
            self.imus[i].advance(dt);
            let robot = &self.robots[i];
            self.wheel_odometry[i] =
                update_from_wheels(&self.wheel_odometry[i], &robot.encoder_speeds, &self.driver, dt)
                    .expect("dt validated");
            self.wheel_odometry[i].timestamp = t;
            let imu = (step % self.imu_every == 0)
                .then(|| imu_sample(robot, &self.imus[i], t, &mut self.rng));
            let scan = if step % self.scan_every == 0 && !self.config.lidars.is_empty() {
                let discs: Vec<Disc> = self.discs_except(i).into_iter().map(|(_, d)| d).collect();
                let scans: Vec<Scan> = self
                    .config
                    .lidars
                    .iter()
                    .map(|spec| {
                        let pose = robot.pose.compose(&spec.mount);
                        raycast_scan(&self.map, &discs, &pose, spec, t, &mut self.rng)
                    })
                    .collect();
                merge_all(&scans).ok()
            } else {
                None
            };
            frames.push(SensorFrame {
                robot_id: i,
                t,
                wheel_odometry: self.wheel_odometry[i],
                ground_truth: ground_truth_odometry(robot, t),
                encoder_speeds: robot.encoder_speeds,
                imu,
                scan,
            });
        }
        frames
    }
}
