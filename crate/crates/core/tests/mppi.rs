use std::time::Instant;

use omninav::mppi::{ControlStatus, Controller, DynamicObstacle, MppiParams};
use omninav::planning::{build_costmap, theta_star_plan, CostmapParams, PlannerOptions};
use omninav::world::{SimConfig, World, WorldMap};
use omninav::{BodyTwist, Point2D, Pose2D, RobotGeometry};

struct Outcome {
    reached: Vec<Option<f64>>,
    min_gap: f64,
    commands: Vec<Vec<BodyTwist>>,
    final_error: Vec<(f64, f64)>,
    collisions: usize,
}

/// Drives every robot to its goal with its own controller on ground-truth poses.
fn drive(map: WorldMap, starts: &[Pose2D], goals: &[Pose2D], limit_s: f64) -> Outcome {
    let cm = build_costmap(&map, CostmapParams::default()).unwrap();
    let mut world = World::new(SimConfig::default(), map, RobotGeometry::robotino(), starts, 17).unwrap();
    let mut ctrls: Vec<Controller> = (0..starts.len())
        .map(|i| Controller::new(MppiParams { seed: 100 + i as u64, ..MppiParams::default() }).unwrap())
        .collect();
    for (i, c) in ctrls.iter_mut().enumerate() {
        let path = theta_star_plan(&cm, &starts[i].position(), &goals[i].position(), &PlannerOptions { clearance: Some(0.3) })
            .unwrap();
        c.set_plan(&path.points, goals[i], &cm);
    }
    let n = starts.len();
    let mut out = Outcome {
        reached: vec![None; n],
        min_gap: f64::INFINITY,
        commands: vec![Vec::new(); n],
        final_error: vec![(0.0, 0.0); n],
        collisions: 0,
    };
    let steps = (limit_s / world.config().dt) as usize;
    for _ in 0..steps {
        let t = world.clock().t();
        let robots = world.robots().to_vec();
        for i in 0..n {
            if out.reached[i].is_some() {
                continue;
            }
            let others: Vec<DynamicObstacle> = robots
                .iter()
                .filter(|r| r.id != i)
                .map(|r| {
                    let (s, c) = r.pose.theta.sin_cos();
                    DynamicObstacle {
                        position: r.pose.position(),
                        velocity: Point2D::new(c * r.twist.vx - s * r.twist.vy, s * r.twist.vx + c * r.twist.vy),
                        radius: r.footprint_radius,
                    }
                })
                .collect();
            let o = ctrls[i].compute_command(&robots[i].pose, &cm, &others, t);
            assert!(ctrls[i].params().within_bounds(&o.command), "{:?}", o.command);
            if o.status == ControlStatus::GoalReached {
                out.reached[i] = Some(t);
                let p = robots[i].pose;
                out.final_error[i] = (p.position().distance(&goals[i].position()), omninav::geometry::angle_diff(p.theta, goals[i].theta).abs());
            } else {
                out.commands[i].push(o.command);
                world.apply_command(i, o.command).unwrap();
            }
        }
        world.step();
        let rs = world.robots();
        for a in 0..n {
            for b in a + 1..n {
                out.min_gap = out.min_gap.min(rs[a].pose.position().distance(&rs[b].pose.position()));
            }
        }
        if out.reached.iter().all(|r| r.is_some()) {
            break;
        }
    }
    out.collisions = (0..n).map(|i| world.collisions(i)).sum();
    out
}

#[test]
fn straight_corridor_reaches_goal_smoothly() {
    let map = WorldMap::empty(8.0, 3.0).unwrap();
    let t0 = Instant::now();
    let out = drive(map, &[Pose2D::new(1.0, 1.5, 0.0)], &[Pose2D::new(6.0, 1.5, 0.0)], 40.0);
    let elapsed = t0.elapsed().as_secs_f64();
    let cmds = &out.commands[0];
    eprintln!("reached {:?} err {:?} ticks {} wall {elapsed:.2}s", out.reached[0], out.final_error[0], cmds.len());
    assert!(out.reached[0].is_some());
    assert_eq!(out.collisions, 0);
    // steady cruise: skip the first second and the last two seconds of the approach
    let steady = &cmds[20..cmds.len().saturating_sub(40)];
    let worst = steady
        .windows(2)
        .map(|w| (w[1].vx - w[0].vx).abs().max((w[1].vy - w[0].vy).abs()).max((w[1].omega - w[0].omega).abs()))
        .fold(0.0, f64::max);
    eprintln!("max step change {worst:.3}");
    assert!(worst < 0.2, "{worst}");
}

#[test]
fn head_on_robots_pass_without_contact() {
    let map = WorldMap::empty(8.0, 3.0).unwrap();
    let starts = [Pose2D::new(1.0, 1.5, 0.0), Pose2D::new(7.0, 1.5, std::f64::consts::PI)];
    let goals = [Pose2D::new(7.0, 1.5, 0.0), Pose2D::new(1.0, 1.5, std::f64::consts::PI)];
    let out = drive(map, &starts, &goals, 90.0);
    eprintln!("reached {:?} gap {:.3}", out.reached, out.min_gap);
    assert!(out.min_gap > 0.46, "{}", out.min_gap);
    assert_eq!(out.collisions, 0);
    assert!(out.reached.iter().all(|r| r.is_some()));
}

