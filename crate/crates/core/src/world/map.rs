use serde::{Deserialize, Serialize};

use super::SimError;
use crate::{Point2D, Pose2D};

const WALL_THICKNESS: f64 = 0.2;

/// Oriented rectangle given by its center, heading and half extents.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Rect {
    pub center: Point2D,
    pub theta: f64,
    pub half_length: f64,
    pub half_width: f64,
}

impl Rect {
    pub fn new(center: Point2D, theta: f64, length: f64, width: f64) -> Self {
        Self {
            center,
            theta,
            half_length: 0.5 * length,
            half_width: 0.5 * width,
        }
    }

    pub fn axis_aligned(min: Point2D, max: Point2D) -> Self {
        Self::new(min.lerp(&max, 0.5), 0.0, max.x - min.x, max.y - min.y)
    }

    pub fn frame(&self) -> Pose2D {
        Pose2D::new(self.center.x, self.center.y, self.theta)
    }

    fn to_local(&self, p: &Point2D) -> Point2D {
        (*p - self.center).rotate(-self.theta)
    }

    /// Euclidean distance from `p` to the rectangle, zero inside.
    pub fn distance(&self, p: &Point2D) -> f64 {
        let l = self.to_local(p);
        let dx = (l.x.abs() - self.half_length).max(0.0);
        let dy = (l.y.abs() - self.half_width).max(0.0);
        dx.hypot(dy)
    }

    pub fn contains(&self, p: &Point2D) -> bool {
        let l = self.to_local(p);
        l.x.abs() <= self.half_length && l.y.abs() <= self.half_width
    }

    pub fn corners(&self) -> [Point2D; 4] {
        let f = self.frame();
        let (hl, hw) = (self.half_length, self.half_width);
        [
            f.transform_point(&Point2D::new(hl, hw)),
            f.transform_point(&Point2D::new(-hl, hw)),
            f.transform_point(&Point2D::new(-hl, -hw)),
            f.transform_point(&Point2D::new(hl, -hw)),
        ]
    }

    /// Entry distance of the ray `origin + t·dir` (unit `dir`), `Some(0)` from inside.
    pub fn ray_hit(&self, origin: &Point2D, dir: &Point2D) -> Option<f64> {
        let o = self.to_local(origin);
        let d = dir.rotate(-self.theta);
        let mut t_min = f64::NEG_INFINITY;
        let mut t_max = f64::INFINITY;
        for (oc, dc, h) in [(o.x, d.x, self.half_length), (o.y, d.y, self.half_width)] {
            if dc.abs() < 1e-15 {
                if oc.abs() > h {
                    return None;
                }
            } else {
                let t1 = (-h - oc) / dc;
                let t2 = (h - oc) / dc;
                t_min = t_min.max(t1.min(t2));
                t_max = t_max.min(t1.max(t2));
            }
        }
        if t_max < t_min.max(0.0) {
            None
        } else {
            Some(t_min.max(0.0))
        }
    }

    /// Separating-axis overlap test; touching edges do not count as overlap.
    pub fn overlaps(&self, other: &Rect) -> bool {
        let a = self.corners();
        let b = other.corners();
        let axes = [
            Point2D::new(1.0, 0.0).rotate(self.theta),
            Point2D::new(0.0, 1.0).rotate(self.theta),
            Point2D::new(1.0, 0.0).rotate(other.theta),
            Point2D::new(0.0, 1.0).rotate(other.theta),
        ];
        axes.iter().all(|ax| {
            let proj = |pts: &[Point2D; 4]| {
                pts.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| {
                    let v = p.dot(ax);
                    (lo.min(v), hi.max(v))
                })
            };
            let (a0, a1) = proj(&a);
            let (b0, b1) = proj(&b);
            a1 > b0 + 1e-12 && b1 > a0 + 1e-12
        })
    }
}

/// Cuboid machine footprint.
#[derive(Debug, Clone, PartialEq)]
pub struct Machine {
    pub id: String,
    pub rect: Rect,
}

impl Machine {
    pub fn new(id: impl Into<String>, x: f64, y: f64, theta_deg: f64, length: f64, width: f64) -> Self {
        Self {
            id: id.into(),
            rect: Rect::new(Point2D::new(x, y), theta_deg.to_radians(), length, width),
        }
    }

    pub fn length(&self) -> f64 {
        2.0 * self.rect.half_length
    }

    pub fn width(&self) -> f64 {
        2.0 * self.rect.half_width
    }
}

/// Which static obstacle a query refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ObstacleRef {
    Wall(usize),
    Machine(usize),
}

/// Rectangular field `[0, width] × [0, height]` bounded by walls, with machines inside.
#[derive(Debug, Clone, PartialEq)]
pub struct WorldMap {
    width: f64,
    height: f64,
    machines: Vec<Machine>,
    walls: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MachineRecord {
    pub id: String,
    pub x: f64,
    pub y: f64,
    #[serde(default)]
    pub theta_deg: f64,
    pub length: f64,
    pub width: f64,
}

/// On-disk map schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MapFile {
    pub width: f64,
    pub height: f64,
    #[serde(default)]
    pub machines: Vec<MachineRecord>,
}

impl WorldMap {
    pub fn new(width: f64, height: f64, machines: Vec<Machine>) -> Result<Self, SimError> {
        if !(width.is_finite() && width > 0.0 && height.is_finite() && height > 0.0) {
            return Err(SimError::InvalidMap(format!("field size {width} x {height}")));
        }
        for m in &machines {
            if !(m.rect.half_length > 0.0 && m.rect.half_width > 0.0) {
                return Err(SimError::InvalidMap(format!("machine {} has empty footprint", m.id)));
            }
            let inside = m.rect.corners().iter().all(|c| {
                c.x >= -1e-9 && c.y >= -1e-9 && c.x <= width + 1e-9 && c.y <= height + 1e-9
            });
            if !inside {
                return Err(SimError::InvalidMap(format!("machine {} leaves the field", m.id)));
            }
        }
        for (i, a) in machines.iter().enumerate() {
            for b in &machines[i + 1..] {
                if a.rect.overlaps(&b.rect) {
                    return Err(SimError::InvalidMap(format!(
                        "machines {} and {} overlap",
                        a.id, b.id
                    )));
                }
            }
        }
        let t = WALL_THICKNESS;
        let walls = vec![
            Rect::axis_aligned(Point2D::new(-t, -t), Point2D::new(0.0, height + t)),
            Rect::axis_aligned(Point2D::new(width, -t), Point2D::new(width + t, height + t)),
            Rect::axis_aligned(Point2D::new(-t, -t), Point2D::new(width + t, 0.0)),
            Rect::axis_aligned(Point2D::new(-t, height), Point2D::new(width + t, height + t)),
        ];
        Ok(Self {
            width,
            height,
            machines,
            walls,
        })
    }

    /// Empty field with border walls only.
    pub fn empty(width: f64, height: f64) -> Result<Self, SimError> {
        Self::new(width, height, Vec::new())
    }

    /// RCLL-style 12 m × 6 m field with seven machines placed mirror-symmetrically about x = 6.
    pub fn default_rcll() -> Self {
        let (l, w) = (0.7, 0.35);
        let machines = vec![
            Machine::new("M1", 6.0, 3.0, 90.0, l, w),
            Machine::new("M2", 3.0, 1.4, 0.0, l, w),
            Machine::new("M3", 9.0, 1.4, 0.0, l, w),
            Machine::new("M4", 2.0, 4.3, 45.0, l, w),
            Machine::new("M5", 10.0, 4.3, 135.0, l, w),
            Machine::new("M6", 4.3, 3.6, 90.0, l, w),
            Machine::new("M7", 7.7, 3.6, 90.0, l, w),
        ];
        Self::new(12.0, 6.0, machines).expect("bundled map is valid")
    }

    pub fn from_file(file: &MapFile) -> Result<Self, SimError> {
        let machines = file
            .machines
            .iter()
            .map(|m| Machine::new(m.id.clone(), m.x, m.y, m.theta_deg, m.length, m.width))
            .collect();
        Self::new(file.width, file.height, machines)
    }

    pub fn to_file(&self) -> MapFile {
        MapFile {
            width: self.width,
            height: self.height,
            machines: self
                .machines
                .iter()
                .map(|m| MachineRecord {
                    id: m.id.clone(),
                    x: m.rect.center.x,
                    y: m.rect.center.y,
                    theta_deg: m.rect.theta.to_degrees(),
                    length: m.length(),
                    width: m.width(),
                })
                .collect(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let file: MapFile =
            serde_json::from_str(text).map_err(|e| SimError::InvalidMap(e.to_string()))?;
        Self::from_file(&file)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_file()).expect("map serializes")
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn height(&self) -> f64 {
        self.height
    }

    pub fn machines(&self) -> &[Machine] {
        &self.machines
    }

    pub fn walls(&self) -> &[Rect] {
        &self.walls
    }

    /// Walls first, then machines.
    pub fn obstacles(&self) -> impl Iterator<Item = (ObstacleRef, &Rect)> {
        self.walls
            .iter()
            .enumerate()
            .map(|(i, r)| (ObstacleRef::Wall(i), r))
            .chain(
                self.machines
                    .iter()
                    .enumerate()
                    .map(|(i, m)| (ObstacleRef::Machine(i), &m.rect)),
            )
    }

    pub fn in_field(&self, p: &Point2D) -> bool {
        p.x >= 0.0 && p.y >= 0.0 && p.x <= self.width && p.y <= self.height
    }

    /// Distance to the nearest wall or machine, zero inside an obstacle.
    pub fn distance_to_obstacles(&self, p: &Point2D) -> f64 {
        self.obstacles()
            .map(|(_, r)| r.distance(p))
            .fold(f64::INFINITY, f64::min)
    }

    pub fn nearest_obstacle(&self, p: &Point2D) -> (ObstacleRef, f64) {
        self.obstacles()
            .map(|(o, r)| (o, r.distance(p)))
            .fold((ObstacleRef::Wall(0), f64::INFINITY), |best, cur| {
                if cur.1 < best.1 {
                    cur
                } else {
                    best
                }
            })
    }

    pub fn describe(&self, o: ObstacleRef) -> String {
        match o {
            ObstacleRef::Wall(i) => format!("wall:{i}"),
            ObstacleRef::Machine(i) => format!("machine:{}", self.machines[i].id),
        }
    }
}
