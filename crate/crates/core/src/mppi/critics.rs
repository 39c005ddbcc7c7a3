use serde::{Deserialize, Serialize};

use crate::geometry::angle_diff;
use crate::planning::{Costmap, LETHAL, MAX_NON_LETHAL};
use crate::{Point2D, Pose2D};

/// Per-critic weights plus the penalties charged per offending step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CriticWeights {
    pub path: f64,
    pub goal: f64,
    pub obstacle: f64,
    pub dynamic: f64,
    pub angle: f64,
    pub lethal_penalty: f64,
    pub contact_penalty: f64,
}

impl Default for CriticWeights {
    fn default() -> Self {
        Self {
            path: 5.0,
            goal: 5.0,
            obstacle: 20.0,
            dynamic: 20.0,
            angle: 3.0,
            lethal_penalty: 100.0,
            contact_penalty: 100.0,
        }
    }
}

/// Another robot, extrapolated at constant world-frame velocity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicObstacle {
    pub position: Point2D,
    pub velocity: Point2D,
    pub radius: f64,
}

impl DynamicObstacle {
    pub fn at(&self, t: f64) -> Point2D {
        self.position + self.velocity.scale(t)
    }
}

/// Distance from each costmap cell centre to a path polyline.
#[derive(Debug, Clone)]
pub struct PathField {
    cols: usize,
    rows: usize,
    resolution: f64,
    distances: Vec<f64>,
    outside: f64,
}

fn segment_distance(p: &Point2D, a: &Point2D, b: &Point2D) -> f64 {
    let ab = *b - *a;
    let len2 = ab.dot(&ab);
    if len2 == 0.0 {
        return p.distance(a);
    }
    let t = ((*p - *a).dot(&ab) / len2).clamp(0.0, 1.0);
    p.distance(&a.lerp(b, t))
}

pub fn distance_to_polyline(p: &Point2D, points: &[Point2D]) -> f64 {
    match points {
        [] => f64::INFINITY,
        [only] => p.distance(only),
        _ => points
            .windows(2)
            .map(|w| segment_distance(p, &w[0], &w[1]))
            .fold(f64::INFINITY, f64::min),
    }
}

impl PathField {
    pub fn build(costmap: &Costmap, path: &[Point2D]) -> Self {
        let (cols, rows) = (costmap.cols(), costmap.rows());
        let mut distances = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                distances.push(distance_to_polyline(&costmap.center(c, r), path));
            }
        }
        let outside = distances.iter().cloned().fold(0.0, f64::max) + 1.0;
        Self {
            cols,
            rows,
            resolution: costmap.resolution(),
            distances,
            outside,
        }
    }

    /// Distance stored for a flat costmap index; off-grid indices get the outside value.
    #[inline]
    pub fn distance_at_index(&self, idx: Option<usize>) -> f64 {
        idx.and_then(|i| self.distances.get(i).copied()).unwrap_or(self.outside)
    }

    #[inline]
    pub fn distance(&self, p: &Point2D) -> f64 {
        let (fx, fy) = (p.x / self.resolution, p.y / self.resolution);
        if !(fx >= 0.0 && fy >= 0.0) {
            return self.outside;
        }
        let (c, r) = (fx as usize, fy as usize);
        if c >= self.cols || r >= self.rows {
            return self.outside;
        }
        self.distances[r * self.cols + c]
    }
}

/// Arc-length parametrized path with monotone progress tracking.
#[derive(Debug, Clone)]
pub struct PathTracker {
    points: Vec<Point2D>,
    arc: Vec<f64>,
    progress: usize,
}

impl PathTracker {
    /// Resamples `path` so consecutive points are at most `spacing` apart.
    pub fn new(path: &[Point2D], spacing: f64) -> Self {
        let mut points = Vec::new();
        for w in path.windows(2) {
            let n = (w[0].distance(&w[1]) / spacing).ceil().max(1.0) as usize;
            for i in 0..n {
                points.push(w[0].lerp(&w[1], i as f64 / n as f64));
            }
        }
        if let Some(last) = path.last() {
            points.push(*last);
        }
        let mut arc = Vec::with_capacity(points.len());
        let mut s = 0.0;
        for (i, p) in points.iter().enumerate() {
            if i > 0 {
                s += p.distance(&points[i - 1]);
            }
            arc.push(s);
        }
        Self { points, arc, progress: 0 }
    }

    pub fn points(&self) -> &[Point2D] {
        &self.points
    }

    pub fn length(&self) -> f64 {
        self.arc.last().copied().unwrap_or(0.0)
    }

    /// Advances the projection of `p` onto the path. The search never moves backwards and
    /// looks at most `window` metres ahead of the previous projection.
    pub fn update(&mut self, p: &Point2D, window: f64) -> usize {
        if self.points.is_empty() {
            return 0;
        }
        let limit = self.arc[self.progress] + window;
        let mut best = (self.progress, p.distance(&self.points[self.progress]));
        for i in self.progress + 1..self.points.len() {
            if self.arc[i] > limit {
                break;
            }
            let d = p.distance(&self.points[i]);
            if d < best.1 {
                best = (i, d);
            }
        }
        self.progress = best.0;
        self.progress
    }

    /// Point `ahead` metres along the path past the current projection (clamped to the end).
    pub fn lookahead(&self, ahead: f64) -> Point2D {
        let Some(last) = self.points.last() else {
            return Point2D::new(0.0, 0.0);
        };
        let target = self.arc[self.progress] + ahead;
        match self.arc[self.progress..].iter().position(|&s| s >= target) {
            Some(k) => self.points[self.progress + k],
            None => *last,
        }
    }
}

/// Everything the critics read for one control tick.
#[derive(Debug, Clone, Copy)]
pub struct CriticContext<'a> {
    pub costmap: &'a Costmap,
    pub path_field: &'a PathField,
    /// Tracked point on the path.
    pub target: Point2D,
    /// Final pose of the leg; its heading drives the angle critic.
    pub goal: Pose2D,
    pub obstacles: &'a [DynamicObstacle],
    pub weights: CriticWeights,
    pub footprint_radius: f64,
    pub safety_margin: f64,
    pub dt: f64,
    /// Multiplier on the inflation part of the obstacle cost; lethal cells are always charged.
    pub inflation_scale: f64,
}

/// Weighted critic sum for one rollout (poses after each step).
pub fn trajectory_cost(ctx: &CriticContext, traj: &[Pose2D]) -> f64 {
    let Some(last) = traj.last() else {
        return 0.0;
    };
    let w = &ctx.weights;
    let (mut path, mut goal, mut obst, mut dynamic, mut angle) = (0.0, 0.0, 0.0, 0.0, 0.0);
    for (k, pose) in traj.iter().enumerate() {
        let p = Point2D::new(pose.x, pose.y);
        let cell = ctx.costmap.index_at(&p);
        path += ctx.path_field.distance_at_index(cell);
        goal += p.distance(&ctx.target);
        let c = cell.map_or(LETHAL, |i| ctx.costmap.cost_at_index(i));
        obst += if c == LETHAL { w.lethal_penalty } else { ctx.inflation_scale * c as f64 / MAX_NON_LETHAL as f64 };
        if !ctx.obstacles.is_empty() {
            let t = (k + 1) as f64 * ctx.dt;
            for o in ctx.obstacles {
                let gap = p.distance(&o.at(t)) - ctx.footprint_radius - o.radius;
                if gap < 0.0 {
                    dynamic += w.contact_penalty;
                } else if gap < ctx.safety_margin {
                    let r = (ctx.safety_margin - gap) / ctx.safety_margin;
                    dynamic += r * r;
                }
            }
        }
        angle += angle_diff(pose.theta, ctx.goal.theta).abs();
    }
    let n = traj.len() as f64;
    let terminal = Point2D::new(last.x, last.y).distance(&ctx.target);
    w.path * path / n
        + w.goal * 0.5 * (terminal + goal / n)
        + w.obstacle * obst / n
        + w.dynamic * dynamic / n
        + w.angle * angle / n
}

pub fn evaluate_costs(trajectories: &[Vec<Pose2D>], ctx: &CriticContext) -> Vec<f64> {
    trajectories.iter().map(|t| trajectory_cost(ctx, t)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mppi::rollout_into;
    use crate::planning::{build_costmap, CostmapParams};
    use crate::world::{Machine, WorldMap};
    use crate::BodyTwist;

    fn line(a: Point2D, b: Point2D, n: usize) -> Vec<Pose2D> {
        (1..=n).map(|i| {
            let p = a.lerp(&b, i as f64 / n as f64);
            Pose2D::new(p.x, p.y, 0.0)
        })
        .collect()
    }

    fn setup(map: &WorldMap, path: &[Point2D]) -> (Costmap, PathField) {
        let cm = build_costmap(map, CostmapParams::default()).unwrap();
        let field = PathField::build(&cm, path);
        (cm, field)
    }

    fn ctx<'a>(cm: &'a Costmap, field: &'a PathField, goal: Pose2D, obs: &'a [DynamicObstacle]) -> CriticContext<'a> {
        CriticContext {
            costmap: cm,
            path_field: field,
            target: goal.position(),
            goal,
            obstacles: obs,
            weights: CriticWeights::default(),
            footprint_radius: 0.23,
            safety_margin: 0.3,
            dt: 0.05,
            inflation_scale: 1.0,
        }
    }

    #[test]
    fn on_path_rollout_beats_offsets() {
        let map = WorldMap::empty(6.0, 3.0).unwrap();
        let (a, b) = (Point2D::new(1.0, 1.5), Point2D::new(3.0, 1.5));
        let (cm, field) = setup(&map, &[a, b]);
        let c = ctx(&cm, &field, Pose2D::new(3.0, 1.5, 0.0), &[]);
        let best = trajectory_cost(&c, &line(a, b, 40));
        for off in [-0.3, -0.1, 0.05, 0.2] {
            let shifted = line(Point2D::new(1.0, 1.5 + off), Point2D::new(3.0, 1.5 + off), 40);
            assert!(trajectory_cost(&c, &shifted) > best);
        }
        let short = line(a, Point2D::new(2.5, 1.5), 40);
        assert!(trajectory_cost(&c, &short) > best);
    }

    #[test]
    fn lethal_rollout_costs_more() {
        let map = WorldMap::new(6.0, 3.0, vec![Machine::new("M", 3.0, 1.5, 90.0, 0.7, 0.35)]).unwrap();
        let (cm, field) = setup(&map, &[Point2D::new(1.0, 1.5), Point2D::new(5.0, 1.5)]);
        let c = ctx(&cm, &field, Pose2D::new(5.0, 1.5, 0.0), &[]);
        let through = line(Point2D::new(2.0, 1.5), Point2D::new(4.0, 1.5), 40);
        let shape: Vec<Pose2D> = line(Point2D::new(2.0, 0.6), Point2D::new(4.0, 0.6), 40);
        // same shape translated into free space, with the path critic switched off
        let mut c2 = c;
        c2.weights.path = 0.0;
        c2.weights.goal = 0.0;
        assert!(trajectory_cost(&c2, &through) > trajectory_cost(&c2, &shape));
        // heavier obstacle weighting never lowers the colliding rollout's rank
        let mut c3 = c2;
        c3.weights.obstacle *= 2.0;
        assert!(
            trajectory_cost(&c3, &through) - trajectory_cost(&c3, &shape)
                >= trajectory_cost(&c2, &through) - trajectory_cost(&c2, &shape)
        );
    }

    #[test]
    fn head_on_prefers_sidestep() {
        let map = WorldMap::empty(8.0, 4.0).unwrap();
        let (a, b) = (Point2D::new(1.0, 2.0), Point2D::new(7.0, 2.0));
        let (cm, field) = setup(&map, &[a, b]);
        // the other robot approaches at 0.7 m/s from 1.6 m ahead
        let other = [DynamicObstacle { position: Point2D::new(2.6, 2.0), velocity: Point2D::new(-0.7, 0.0), radius: 0.23 }];
        let c = ctx(&cm, &field, Pose2D::new(7.0, 2.0, 0.0), &other);
        let mut straight = Vec::new();
        rollout_into(&Pose2D::new(1.0, 2.0, 0.0), &[BodyTwist::new(0.7, 0.0, 0.0); 80], 0.05, &mut straight);
        let mut sidestep = Vec::new();
        let mut controls = vec![BodyTwist::new(0.3, 0.6, 0.0); 20];
        controls.extend(vec![BodyTwist::new(0.7, 0.0, 0.0); 60]);
        rollout_into(&Pose2D::new(1.0, 2.0, 0.0), &controls, 0.05, &mut sidestep);
        assert!(trajectory_cost(&c, &straight) > trajectory_cost(&c, &sidestep));
    }

    #[test]
    fn tracker_progress_is_monotone() {
        let mut tr = PathTracker::new(&[Point2D::new(0.0, 0.0), Point2D::new(2.0, 0.0), Point2D::new(2.0, 2.0)], 0.05);
        assert!((tr.length() - 4.0).abs() < 1e-9);
        tr.update(&Point2D::new(1.0, 0.1), 3.0);
        let la = tr.lookahead(1.5);
        assert!((la.x - 2.0).abs() < 1e-9 && (la.y - 0.5).abs() < 0.06);
        // moving back does not rewind progress
        let before = tr.update(&Point2D::new(1.0, 0.0), 3.0);
        assert_eq!(tr.update(&Point2D::new(0.0, 0.0), 3.0), before);
        assert_eq!(tr.lookahead(100.0), Point2D::new(2.0, 2.0));
    }

    #[test]
    fn path_field_matches_polyline_distance() {
        let map = WorldMap::empty(4.0, 2.0).unwrap();
        let path = [Point2D::new(0.5, 0.5), Point2D::new(3.5, 1.5)];
        let (cm, field) = setup(&map, &path);
        let p = cm.center(30, 5);
        assert!((field.distance(&p) - distance_to_polyline(&p, &path)).abs() < 1e-12);
        let far = field.distance(&cm.center(79, 0)).max(field.distance(&cm.center(0, 39)));
        assert!(field.distance(&Point2D::new(-1.0, 0.0)) > far);
    }

    #[test]
    fn inflation_scale_keeps_lethal_charge() {
        let map = WorldMap::new(6.0, 3.0, vec![Machine::new("M", 3.0, 1.5, 90.0, 0.7, 0.35)]).unwrap();
        // a goal 0.45 m in front of the machine face sits inside the inflation band
        let goal = Pose2D::new(3.0, 1.5 - 0.175 - 0.45, 0.0);
        let (cm, field) = setup(&map, &[Point2D::new(3.0, 0.3), goal.position()]);
        let mut c = ctx(&cm, &field, goal, &[]);
        c.weights.path = 0.0;
        c.weights.goal = 0.0;
        c.weights.angle = 0.0;
        let parked = vec![goal; 20];
        let inside = vec![Pose2D::new(3.0, 1.5, 0.0); 20];
        let full = trajectory_cost(&c, &parked);
        assert!(full > 0.0);
        c.inflation_scale = 0.0;
        assert_eq!(trajectory_cost(&c, &parked), 0.0);
        assert_eq!(trajectory_cost(&c, &inside), c.weights.obstacle * c.weights.lethal_penalty);
    }
}
