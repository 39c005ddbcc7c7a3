//! Runs the waypoint protocol: every path is driven `repetitions` times, each run in a
//! fresh world with its own noise streams.

use std::sync::Arc;

use omninav::geometry::angle_diff;
use omninav::localization::{LikelihoodField, Localizer};
use omninav::mppi::{ControlStatus, Controller, DynamicObstacle, MppiParams};
use omninav::planning::{build_costmap, plan, Costmap, PlannedPath, PlannerOptions, PlanningError};
use omninav::world::{SimEventKind, World, WorldMap};
use omninav::{BodyTwist, Point2D, Pose2D, RobotGeometry};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::config::ExperimentConfig;
use crate::seeds::{derive, Stream};
use crate::waypoints::generate_waypoints;
use crate::HarnessError;

/// Seconds between attempts when no path could be found.
const REPLAN_INTERVAL: f64 = 1.0;

#[derive(Debug, Clone, PartialEq)]
pub struct LegRecord {
    /// Index of the target waypoint (1-based legs: leg k drives to waypoint k).
    pub leg: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
    pub reached: bool,
    /// Ground-truth position and heading error at `t_end`.
    pub error_xy: f64,
    pub error_yaw: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrajectorySample {
    pub t: f64,
    pub truth: Pose2D,
    pub estimate: Pose2D,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub experiment: String,
    pub path: usize,
    pub rep: usize,
    pub robot: usize,
    pub legs: Vec<LegRecord>,
    pub collisions: usize,
    pub machine_collisions: usize,
    pub robot_collisions: usize,
    pub recoveries: usize,
    pub replans: usize,
    pub trajectory: Vec<TrajectorySample>,
}

impl RunRecord {
    pub fn total_time(&self) -> f64 {
        self.legs.iter().map(|l| l.duration).sum()
    }

    pub fn all_reached(&self) -> bool {
        self.legs.iter().all(|l| l.reached)
    }

    pub fn failed_legs(&self) -> usize {
        self.legs.iter().filter(|l| !l.reached).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EventRecord {
    pub t: f64,
    pub robot: usize,
    pub kind: String,
    pub detail: String,
}

/// Everything one path × repetition produced.
#[derive(Debug, Clone)]
pub struct RunOutput {
    pub path: usize,
    pub rep: usize,
    pub records: Vec<RunRecord>,
    pub events: Vec<EventRecord>,
}

#[derive(Debug, Clone)]
pub struct ExperimentOutput {
    pub experiment: String,
    pub map: WorldMap,
    /// `waypoints[path][robot]`.
    pub waypoints: Vec<Vec<Vec<Pose2D>>>,
    pub runs: Vec<RunOutput>,
}

impl ExperimentOutput {
    pub fn records(&self) -> impl Iterator<Item = &RunRecord> {
        self.runs.iter().flat_map(|r| r.records.iter())
    }
}

/// Waypoints for every path and robot. Robot `i` draws from its own stream; later robots
/// also keep clear of the waypoints already given to earlier robots on the same path.
pub fn experiment_waypoints(cfg: &ExperimentConfig, map: &WorldMap) -> Result<Vec<Vec<Vec<Pose2D>>>, HarnessError> {
    (0..cfg.paths_per_experiment)
        .map(|p| {
            let mut per_robot: Vec<Vec<Pose2D>> = Vec::with_capacity(cfg.robots);
            for r in 0..cfg.robots {
                let mut rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, Stream::Waypoints, &[p as u64, r as u64]));
                let taken: Vec<Pose2D> = per_robot.iter().flatten().copied().collect();
                per_robot.push(generate_waypoints(map, &mut rng, cfg.waypoints_per_path, &cfg.waypoints, &taken)?);
            }
            Ok(per_robot)
        })
        .collect()
}

/// Shared, run-independent pieces.
pub struct Setup {
    pub map: WorldMap,
    pub costmap: Costmap,
    pub field: Arc<LikelihoodField>,
    pub geometry: RobotGeometry,
}

impl Setup {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, HarnessError> {
        let map = cfg.load_map()?;
        let costmap = build_costmap(&map, cfg.costmap).map_err(|e| HarnessError::Config(e.to_string()))?;
        let field = Arc::new(
            LikelihoodField::build(&map, cfg.localization.field_resolution, cfg.localization.sensor_model)
                .map_err(|e| HarnessError::Config(e.to_string()))?,
        );
        let geometry = cfg.geometry.build::<f64>().map_err(|e| HarnessError::Config(e.to_string()))?;
        Ok(Self { map, costmap, field, geometry })
    }
}

/// Plans with the configured clearance and falls back to lethal-only blocking.
pub fn plan_leg(cfg: &ExperimentConfig, cm: &Costmap, from: &Point2D, to: &Point2D) -> Result<PlannedPath, PlanningError> {
    let preferred = PlannerOptions { clearance: cfg.planner.clearance };
    match plan(cfg.planner.kind, cm, from, to, &preferred) {
        Ok(p) => Ok(p),
        Err(e) if cfg.planner.clearance.is_some() => {
            plan(cfg.planner.kind, cm, from, to, &PlannerOptions { clearance: None }).map_err(|_| e)
        }
        Err(e) => Err(e),
    }
}

struct Navigator {
    waypoints: Vec<Pose2D>,
    /// Waypoint currently driven to; `waypoints.len()` once finished.
    target: usize,
    leg_start: f64,
    next_plan_attempt: Option<f64>,
    localizer: Localizer,
    controller: Controller,
    record: RunRecord,
}

impl Navigator {
    fn finished(&self) -> bool {
        self.target >= self.waypoints.len()
    }
}

/// Drives one path × repetition.
pub fn run_once(cfg: &ExperimentConfig, setup: &Setup, waypoints: &[Vec<Pose2D>], path: usize, rep: usize) -> Result<RunOutput, HarnessError> {
    let idx = [path as u64, rep as u64];
    let starts: Vec<Pose2D> = waypoints.iter().map(|w| w[0]).collect();
    let mut world = World::new(
        cfg.sim.clone(),
        setup.map.clone(),
        setup.geometry.clone(),
        &starts,
        derive(cfg.seed, Stream::World, &idx),
    )
    .map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut peer_rng = ChaCha8Rng::seed_from_u64(derive(cfg.seed, Stream::PeerNoise, &idx));
    let peer_noise = Normal::new(0.0, cfg.peer_pose_noise).map_err(|e| HarnessError::Config(e.to_string()))?;
    let mut events = Vec::new();
    let mut navs = Vec::with_capacity(starts.len());
    for (i, w) in waypoints.iter().enumerate() {
        let robot_idx = [path as u64, rep as u64, i as u64];
        let localizer = Localizer::new(
            cfg.localization,
            setup.field.clone(),
            w[0],
            derive(cfg.seed, Stream::Localizer, &robot_idx),
        )
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        let controller = Controller::new(MppiParams {
            seed: derive(cfg.seed, Stream::Controller, &robot_idx),
            ..cfg.controller.clone()
        })
        .map_err(|e| HarnessError::Config(e.to_string()))?;
        navs.push(Navigator {
            waypoints: w.clone(),
            target: 1,
            leg_start: 0.0,
            next_plan_attempt: None,
            localizer,
            controller,
            record: RunRecord {
                experiment: cfg.experiment.clone(),
                path,
                rep,
                robot: i,
                legs: Vec::new(),
                collisions: 0,
                machine_collisions: 0,
                robot_collisions: 0,
                recoveries: 0,
                replans: 0,
                trajectory: Vec::new(),
            },
        });
    }
    for (i, nav) in navs.iter_mut().enumerate() {
        start_leg(cfg, setup, nav, i, 0.0, &mut events);
    }

    let dt = world.config().dt;
    let mut step: u64 = 0;
    loop {
        let t = world.clock().t();
        if step % cfg.trajectory_stride as u64 == 0 {
            for (i, nav) in navs.iter_mut().enumerate() {
                nav.record.trajectory.push(TrajectorySample {
                    t,
                    truth: world.robots()[i].pose,
                    estimate: nav.localizer.estimate(),
                });
            }
        }
        if navs.iter().all(Navigator::finished) {
            break;
        }
        let robots = world.robots().to_vec();
        for i in 0..navs.len() {
            let command = tick(cfg, setup, &mut navs[i], i, &robots, t, &mut peer_rng, &peer_noise, &mut events);
            world.apply_command(i, command).map_err(|e| HarnessError::Config(e.to_string()))?;
        }
        let frames = world.step();
        step += 1;
        for f in &frames {
            let nav = &mut navs[f.robot_id];
            let twist = f.odometry(cfg.odometry_source).twist;
            nav.localizer.predict(&twist, dt).map_err(|e| HarnessError::Config(e.to_string()))?;
            if let Some(imu) = &f.imu {
                nav.localizer.observe_yaw(imu).map_err(|e| HarnessError::Config(e.to_string()))?;
            }
            if let Some(scan) = &f.scan {
                nav.localizer.observe_scan(scan);
            }
        }
        for e in world.drain_events() {
            let rec = &mut navs[e.robot_id].record;
            if e.kind == SimEventKind::Collision {
                rec.collisions += 1;
                if e.detail.starts_with("robot:") {
                    rec.robot_collisions += 1;
                } else {
                    rec.machine_collisions += 1;
                }
            }
            events.push(EventRecord { t: e.t, robot: e.robot_id, kind: e.kind.as_str().into(), detail: e.detail });
        }
    }
    events.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.robot.cmp(&b.robot)));
    Ok(RunOutput { path, rep, records: navs.into_iter().map(|n| n.record).collect(), events })
}

fn start_leg(cfg: &ExperimentConfig, setup: &Setup, nav: &mut Navigator, robot: usize, t: f64, events: &mut Vec<EventRecord>) {
    nav.leg_start = t;
    nav.controller.clear_plan();
    let goal = nav.waypoints[nav.target];
    events.push(EventRecord {
        t,
        robot,
        kind: "leg_start".into(),
        detail: format!("waypoint {} ({:.3} {:.3} {:.3})", nav.target, goal.x, goal.y, goal.theta),
    });
    replan(cfg, setup, nav, robot, t, &[], events);
}

/// Plans the current leg. `peers` are other robots marked as obstacles for this plan only,
/// used after a recovery so the new route avoids a robot parked on the old one.
fn replan(
    cfg: &ExperimentConfig,
    setup: &Setup,
    nav: &mut Navigator,
    robot: usize,
    t: f64,
    peers: &[(Point2D, f64)],
    events: &mut Vec<EventRecord>,
) {
    let goal = nav.waypoints[nav.target];
    let from = nav.localizer.estimate().position();
    let planned = if peers.is_empty() {
        plan_leg(cfg, &setup.costmap, &from, &goal.position())
    } else {
        plan_leg(cfg, &setup.costmap.with_discs(peers), &from, &goal.position())
            .or_else(|_| plan_leg(cfg, &setup.costmap, &from, &goal.position()))
    };
    match planned {
        Ok(p) => {
            nav.controller.set_plan(&p.points, goal, &setup.costmap);
            nav.next_plan_attempt = None;
            events.push(EventRecord {
                t,
                robot,
                kind: "plan".into(),
                detail: format!("{} length {:.3} segments {}", p.planner, p.length, p.segment_count()),
            });
        }
        Err(e) => {
            nav.controller.clear_plan();
            nav.next_plan_attempt = Some(t + REPLAN_INTERVAL);
            events.push(EventRecord { t, robot, kind: "plan_failed".into(), detail: e.to_string() });
        }
    }
}

fn finish_leg(nav: &mut Navigator, truth: &Pose2D, t: f64, reached: bool) {
    let goal = nav.waypoints[nav.target];
    nav.record.legs.push(LegRecord {
        leg: nav.target,
        t_start: nav.leg_start,
        t_end: t,
        duration: t - nav.leg_start,
        reached,
        error_xy: truth.position().distance(&goal.position()),
        error_yaw: angle_diff(truth.theta, goal.theta).abs(),
    });
    nav.target += 1;
}

#[allow(clippy::too_many_arguments)]
fn tick(
    cfg: &ExperimentConfig,
    setup: &Setup,
    nav: &mut Navigator,
    i: usize,
    robots: &[omninav::world::RobotState],
    t: f64,
    peer_rng: &mut ChaCha8Rng,
    peer_noise: &Normal<f64>,
    events: &mut Vec<EventRecord>,
) -> BodyTwist {
    if nav.finished() {
        return BodyTwist::zero();
    }
    let truth = robots[i].pose;
    if t - nav.leg_start >= cfg.leg_timeout {
        events.push(EventRecord { t, robot: i, kind: "leg_timeout".into(), detail: format!("waypoint {}", nav.target) });
        finish_leg(nav, &truth, t, false);
        if nav.finished() {
            nav.controller.clear_plan();
        } else {
            start_leg(cfg, setup, nav, i, t, events);
        }
        return BodyTwist::zero();
    }
    if nav.next_plan_attempt.is_some_and(|at| t >= at) {
        replan(cfg, setup, nav, i, t, &[], events);
    }
    let peers: Vec<DynamicObstacle> = robots
        .iter()
        .filter(|r| r.id != i)
        .map(|r| {
            let (s, c) = r.pose.theta.sin_cos();
            let noise = Point2D::new(peer_noise.sample(peer_rng), peer_noise.sample(peer_rng));
            DynamicObstacle {
                position: r.pose.position() + noise,
                velocity: Point2D::new(c * r.twist.vx - s * r.twist.vy, s * r.twist.vx + c * r.twist.vy),
                radius: r.footprint_radius,
            }
        })
        .collect();
    let estimate = nav.localizer.estimate();
    let recoveries_before = nav.controller.recoveries();
    let out = nav.controller.compute_command(&estimate, &setup.costmap, &peers, t);
    if nav.controller.recoveries() > recoveries_before {
        nav.record.recoveries += 1;
        events.push(EventRecord { t, robot: i, kind: "recovery".into(), detail: "spin".into() });
    }
    match out.status {
        ControlStatus::GoalReached => {
            events.push(EventRecord { t, robot: i, kind: "goal_reached".into(), detail: format!("waypoint {}", nav.target) });
            finish_leg(nav, &truth, t, true);
            if nav.finished() {
                nav.controller.clear_plan();
            } else {
                start_leg(cfg, setup, nav, i, t, events);
            }
        }
        ControlStatus::ReplanRequested => {
            nav.record.replans += 1;
            let discs: Vec<(Point2D, f64)> =
                robots.iter().filter(|r| r.id != i).map(|r| (r.pose.position(), r.footprint_radius)).collect();
            replan(cfg, setup, nav, i, t, &discs, events);
        }
        ControlStatus::NoPath if nav.next_plan_attempt.is_none() => {
            nav.next_plan_attempt = Some(t + REPLAN_INTERVAL);
        }
        _ => {}
    }
    out.command
}

/// Runs every path × repetition in order.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentOutput, HarnessError> {
    run_experiment_with(cfg, |_| {})
}

/// Like [`run_experiment`], calling `progress` after each run.
pub fn run_experiment_with(cfg: &ExperimentConfig, mut progress: impl FnMut(&RunOutput)) -> Result<ExperimentOutput, HarnessError> {
    cfg.validate()?;
    let setup = Setup::new(cfg)?;
    let waypoints = experiment_waypoints(cfg, &setup.map)?;
    let mut runs = Vec::with_capacity(cfg.paths_per_experiment * cfg.repetitions);
    for (p, w) in waypoints.iter().enumerate() {
        for rep in 0..cfg.repetitions {
            let run = run_once(cfg, &setup, w, p, rep)?;
            progress(&run);
            runs.push(run);
        }
    }
    Ok(ExperimentOutput { experiment: cfg.experiment.clone(), map: setup.map, waypoints, runs })
}
