use std::sync::Arc;

use omninav::geometry::angle_diff;
use omninav::localization::{
    ekf_predict, ekf_update_yaw, EkfState, LikelihoodField, ParticleFilter, ParticleFilterConfig, SensorModel,
};
use omninav::odometry::OdometrySource;
use omninav::world::{merge_all, raycast_scan, Disc, LidarSpec, SimConfig, World, WorldMap};
use omninav::{BodyTwist, Mat3, Pose2D, RobotGeometry};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn noiseless_scan(map: &WorldMap, pose: &Pose2D) -> omninav::world::MergedScan {
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let scans: Vec<_> = LidarSpec::default_pair()
        .into_iter()
        .map(|mut spec| {
            spec.noise_sigma = 0.0;
            raycast_scan(map, &[] as &[Disc], &pose.compose(&spec.mount), &spec, 0.0, &mut rng)
        })
        .collect();
    merge_all(&scans).unwrap()
}

/// Runs one seeded trial and reports (position error, heading error) after 30 cycles.
pub fn convergence_trial(map: &WorldMap, field: &LikelihoodField, seed: u64) -> (f64, f64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut truth = loop {
        let p = Pose2D::new(
            rng.random_range(1.0..11.0),
            rng.random_range(1.0..5.0),
            rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        );
        if map.distance_to_obstacles(&p.position()) > 0.8 {
            break p;
        }
    };
    let init = Pose2D::new(
        truth.x + rng.random_range(-0.5..0.5),
        truth.y + rng.random_range(-0.5..0.5),
        truth.theta + rng.random_range(-0.3..0.3),
    );
    let mut pf = ParticleFilter::uniform_around(ParticleFilterConfig::default(), &init, [0.5, 0.5, 0.3], &mut rng).unwrap();
    // slow turn with a little forward motion: every cycle carries an exact odometry delta
    let delta = Pose2D::new(0.01, 0.0, 0.05);
    for cycle in 0..30 {
        if cycle > 0 {
            truth = truth.compose(&delta);
            pf.predict(&delta, &mut rng);
        }
        let scan = noiseless_scan(map, &truth);
        pf.correct(&scan, field, &mut rng);
    }
    let (est, _) = pf.estimate();
    (est.position().distance(&truth.position()), angle_diff(est.theta, truth.theta).abs())
}

#[test]
fn particle_filter_converges_from_local_uncertainty() {
    let map = WorldMap::default_rcll();
    let field = LikelihoodField::build(&map, 0.05, SensorModel::default()).unwrap();
    let mut ok = 0;
    for seed in 0..50 {
        let (dp, dth) = convergence_trial(&map, &field, 1000 + seed);
        if dp < 0.1 && dth < 0.05 {
            ok += 1;
        } else {
            eprintln!("trial {seed}: {dp:.3} m {dth:.3} rad");
        }
    }
    assert!(ok >= 48, "{ok}/50 trials converged");
}

/// Heading RMS of (raw wheel odometry, EKF with gyro) over a seeded noisy run.
fn heading_rms(seconds: f64, seed: u64) -> (f64, f64) {
    let mut cfg = SimConfig::default();
    cfg.imu.bias = 0.0;
    let map = WorldMap::default_rcll();
    let start = Pose2D::new(2.0, 3.0, 0.0);
    let mut world = World::new(cfg.clone(), map, RobotGeometry::robotino(), &[start], seed).unwrap();
    let mut ekf = EkfState::new(start, Mat3::diag([1e-4, 1e-4, 1e-4]));
    let q_rate = [1e-3, 1e-3, 1e-3];
    let dt = cfg.dt;
    let steps = (seconds / dt).round() as usize;
    let (mut raw_sq, mut ekf_sq) = (0.0, 0.0);
    for k in 0..steps {
        let t = k as f64 * dt;
        // a wandering but bounded motion near the start
        let cmd = BodyTwist::new(0.15 * (0.3 * t).sin(), 0.15 * (0.2 * t).cos(), 0.4 * (0.25 * t).sin());
        world.apply_command(0, cmd).unwrap();
        let frame = world.step().remove(0);
        let odom = frame.odometry(OdometrySource::WheelEncoders);
        let q = Mat3::diag([q_rate[0] * dt, q_rate[1] * dt, q_rate[2] * dt]);
        ekf = ekf_predict(&ekf, &odom.twist, dt, &q).unwrap();
        if let Some(imu) = frame.imu {
            ekf = ekf_update_yaw(&ekf, imu.yaw, imu.sigma * imu.sigma).unwrap();
        }
        let truth = frame.ground_truth.pose.theta;
        raw_sq += angle_diff(odom.pose.theta, truth).powi(2);
        ekf_sq += angle_diff(ekf.mean.theta, truth).powi(2);
    }
    ((raw_sq / steps as f64).sqrt(), (ekf_sq / steps as f64).sqrt())
}

#[test]
fn gyro_fusion_beats_wheel_odometry_heading() {
    let (raw, fused) = heading_rms(60.0, 7);
    assert!(fused < raw, "ekf {fused} vs odometry {raw}");
}

#[test]
fn localizer_tracks_in_simulation() {
    let map = WorldMap::default_rcll();
    let field = Arc::new(LikelihoodField::build(&map, 0.05, SensorModel::default()).unwrap());
    let start = Pose2D::new(1.5, 1.0, 0.3);
    let mut world = World::new(SimConfig::default(), map, RobotGeometry::robotino(), &[start], 3).unwrap();
    let mut loc = omninav::localization::Localizer::new(Default::default(), field, start, 11).unwrap();
    let dt = world.config().dt;
    let mut worst: f64 = 0.0;
    for _ in 0..400 {
        world.apply_command(0, BodyTwist::new(0.3, 0.05, 0.1)).unwrap();
        let frame = world.step().remove(0);
        let odom = frame.odometry(OdometrySource::WheelEncoders);
        loc.predict(&odom.twist, dt).unwrap();
        if let Some(imu) = &frame.imu {
            loc.observe_yaw(imu).unwrap();
        }
        if let Some(scan) = &frame.scan {
            loc.observe_scan(scan);
        }
        let est = loc.estimate();
        worst = worst.max(est.position().distance(&frame.ground_truth.pose.position()));
    }
    assert!(loc.pf_updates() > 10);
    assert!(worst < 0.25, "{worst}");
}
