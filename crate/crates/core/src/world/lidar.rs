use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::map::WorldMap;
use super::SimError;
use crate::{Point2D, Pose2D};

/// Planar laser scanner mounted at a static pose on the robot.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LidarSpec {
    /// Mount pose relative to the robot frame.
    pub mount: Pose2D,
    pub fov: f64,
    pub beam_count: usize,
    pub max_range: f64,
    pub min_range: f64,
    pub noise_sigma: f64,
}

impl LidarSpec {
    /// 270° field of view, 1° resolution, 0.05-10 m.
    pub fn with_mount(mount: Pose2D) -> Self {
        Self {
            mount,
            fov: 270f64.to_radians(),
            beam_count: 271,
            max_range: 10.0,
            min_range: 0.05,
            noise_sigma: 0.01,
        }
    }

    /// Front-left and back-right diagonal mounts.
    pub fn default_pair() -> Vec<Self> {
        vec![
            Self::with_mount(Pose2D::new(0.12, 0.12, 45f64.to_radians())),
            Self::with_mount(Pose2D::new(-0.12, -0.12, -135f64.to_radians())),
        ]
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if self.beam_count < 2 {
            return Err(SimError::InvalidSensor("beam_count must be >= 2".into()));
        }
        if !(self.min_range > 0.0 && self.min_range < self.max_range && self.max_range.is_finite()) {
            return Err(SimError::InvalidSensor("need 0 < min_range < max_range".into()));
        }
        if !(self.fov > 0.0 && self.fov <= 2.0 * std::f64::consts::PI) {
            return Err(SimError::InvalidSensor("fov must be in (0, 2π]".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(SimError::InvalidSensor("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }

    pub fn angle_increment(&self) -> f64 {
        self.fov / (self.beam_count - 1) as f64
    }

    /// Beam angle in the sensor frame.
    pub fn beam_angle(&self, i: usize) -> f64 {
        -0.5 * self.fov + i as f64 * self.angle_increment()
    }
}

/// Circular footprint of another robot seen by the scanner.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Disc {
    pub center: Point2D,
    pub radius: f64,
}

impl Disc {
    pub fn ray_hit(&self, origin: &Point2D, dir: &Point2D) -> Option<f64> {
        let oc = *origin - self.center;
        let b = oc.dot(dir);
        let c = oc.dot(&oc) - self.radius * self.radius;
        if c <= 0.0 {
            return Some(0.0);
        }
        let disc = b * b - c;
        if disc < 0.0 {
            return None;
        }
        let t = -b - disc.sqrt();
        (t >= 0.0).then_some(t)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scan {
    pub timestamp: f64,
    pub mount: Pose2D,
    pub angle_min: f64,
    pub angle_increment: f64,
    pub max_range: f64,
    pub ranges: Vec<f64>,
    /// `false` marks a beam that hit nothing (range reported as `max_range`).
    pub valid: Vec<bool>,
}

impl Scan {
    pub fn returns(&self) -> usize {
        self.valid.iter().filter(|v| **v).count()
    }
}

/// Closest intersection of a ray with walls, machines and discs.
pub fn ray_distance(map: &WorldMap, discs: &[Disc], origin: &Point2D, dir: &Point2D) -> Option<f64> {
    map.obstacles()
        .filter_map(|(_, r)| r.ray_hit(origin, dir))
        .chain(discs.iter().filter_map(|d| d.ray_hit(origin, dir)))
        .fold(None, |best: Option<f64>, t| Some(best.map_or(t, |b| b.min(t))))
}

/// Simulates one sweep of a scanner at world pose `sensor_pose`.
pub fn raycast_scan<R: Rng + ?Sized>(
    map: &WorldMap,
    discs: &[Disc],
    sensor_pose: &Pose2D,
    spec: &LidarSpec,
    timestamp: f64,
    rng: &mut R,
) -> Scan {
    let noise = (spec.noise_sigma > 0.0).then(|| Normal::new(0.0, spec.noise_sigma).unwrap());
    let origin = sensor_pose.position();
    let mut ranges = Vec::with_capacity(spec.beam_count);
    let mut valid = Vec::with_capacity(spec.beam_count);
    for i in 0..spec.beam_count {
        let a = sensor_pose.theta + spec.beam_angle(i);
        let dir = Point2D::new(a.cos(), a.sin());
        match ray_distance(map, discs, &origin, &dir).filter(|t| *t <= spec.max_range) {
            Some(t) => {
                let n = noise.as_ref().map_or(0.0, |d| d.sample(rng));
                ranges.push((t + n).clamp(spec.min_range, spec.max_range));
                valid.push(true);
            }
            None => {
                ranges.push(spec.max_range);
                valid.push(false);
            }
        }
    }
    Scan {
        timestamp,
        mount: spec.mount,
        angle_min: spec.beam_angle(0),
        angle_increment: spec.angle_increment(),
        max_range: spec.max_range,
        ranges,
        valid,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScanPoint {
    /// Bearing in the robot frame.
    pub angle: f64,
    /// Distance from the robot origin.
    pub range: f64,
    pub point: Point2D,
}

/// Returns of both scanners as one robot-frame point set, sorted by bearing.
#[derive(Debug, Clone, PartialEq)]
pub struct MergedScan {
    pub timestamp: f64,
    pub max_range: f64,
    pub points: Vec<ScanPoint>,
}

/// Unions two scans in the robot frame using their static mounts. No-return beams are dropped.
pub fn merge_scans(a: &Scan, b: &Scan) -> Result<MergedScan, SimError> {
    merge_all(&[a.clone(), b.clone()])
}

/// Like [`merge_scans`] for any number of scanners.
pub fn merge_all(scans: &[Scan]) -> Result<MergedScan, SimError> {
    let Some(first) = scans.first() else {
        return Err(SimError::InvalidSensor("no scans to merge".into()));
    };
    if let Some(other) = scans.iter().find(|s| s.timestamp != first.timestamp) {
        return Err(SimError::TimestampMismatch(first.timestamp, other.timestamp));
    }
    let mut points = Vec::with_capacity(scans.iter().map(Scan::returns).sum());
    for scan in scans {
        for (i, (r, ok)) in scan.ranges.iter().zip(&scan.valid).enumerate() {
            if !ok {
                continue;
            }
            let ang = scan.angle_min + i as f64 * scan.angle_increment;
            let local = Point2D::new(r * ang.cos(), r * ang.sin());
            let p = scan.mount.transform_point(&local);
            points.push(ScanPoint {
                angle: p.y.atan2(p.x),
                range: p.norm(),
                point: p,
            });
        }
    }
    points.sort_by(|p, q| p.angle.total_cmp(&q.angle).then(p.range.total_cmp(&q.range)));
    Ok(MergedScan {
        timestamp: first.timestamp,
        max_range: scans.iter().map(|s| s.max_range).fold(0.0, f64::max),
        points,
    })
}
