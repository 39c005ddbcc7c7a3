//! Static costmap and three global planners over it: a wavefront (Dijkstra) planner,
//! grid A*, and Theta* with line-of-sight parent shortcuts.
//!
//! All planners search the same 8-connected graph. Nodes are free cells placed at
//! their centres, except the start and goal cells, which sit at the exact query points.
//! Diagonal moves may not cut a blocked corner. Edge weights are Euclidean lengths, so
//! the grid planners return shortest grid paths and Theta* never returns a longer one.

mod costmap;
mod line_of_sight;

pub use costmap::{build_costmap, Costmap, CostmapParams, FREE, LETHAL, MAX_NON_LETHAL};
pub use line_of_sight::{line_of_sight, supercover};

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::Point2D;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlanningError {
    #[error("invalid costmap parameters: {0}")]
    InvalidParams(String),
    #[error("start ({0:.3}, {1:.3}) is blocked or off the map")]
    StartBlocked(f64, f64),
    #[error("goal ({0:.3}, {1:.3}) is blocked or off the map")]
    GoalBlocked(f64, f64),
    #[error("no path between start and goal")]
    NoPath,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlannerKind {
    Dijkstra,
    Astar,
    ThetaStar,
}

impl PlannerKind {
    pub const ALL: [PlannerKind; 3] = [PlannerKind::Dijkstra, PlannerKind::Astar, PlannerKind::ThetaStar];

    pub fn as_str(&self) -> &'static str {
        match self {
            PlannerKind::Dijkstra => "dijkstra",
            PlannerKind::Astar => "astar",
            PlannerKind::ThetaStar => "theta_star",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "dijkstra" | "navfn" => Some(PlannerKind::Dijkstra),
            "astar" | "a_star" | "smac" => Some(PlannerKind::Astar),
            "theta_star" | "thetastar" | "theta" => Some(PlannerKind::ThetaStar),
            _ => None,
        }
    }
}

impl std::fmt::Display for PlannerKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerOptions {
    /// Cells whose centre lies within this distance of an obstacle are treated as blocked,
    /// on top of the lethal cells.
    pub clearance: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlannedPath {
    pub planner: PlannerKind,
    pub points: Vec<Point2D>,
    pub length: f64,
}

impl PlannedPath {
    fn new(planner: PlannerKind, points: Vec<Point2D>) -> Self {
        let length = polyline_length(&points);
        Self { planner, points, length }
    }

    /// Number of straight pieces once collinear consecutive points are merged.
    pub fn segment_count(&self) -> usize {
        let mut dirs: Vec<Point2D> = Vec::new();
        for w in self.points.windows(2) {
            let d = w[1] - w[0];
            let n = d.norm();
            if n < 1e-12 {
                continue;
            }
            let u = d.scale(1.0 / n);
            match dirs.last() {
                Some(prev) if prev.cross(&u).abs() < 1e-9 && prev.dot(&u) > 0.0 => {}
                _ => dirs.push(u),
            }
        }
        dirs.len()
    }
}

pub fn polyline_length(points: &[Point2D]) -> f64 {
    points.windows(2).map(|w| w[0].distance(&w[1])).sum()
}

const NEIGHBORS: [(i64, i64); 8] = [(-1, -1), (0, -1), (1, -1), (-1, 0), (1, 0), (-1, 1), (0, 1), (1, 1)];

/// The search graph shared by all planners.
struct Graph<'a> {
    cm: &'a Costmap,
    blocked: Vec<bool>,
    start: (usize, Point2D),
    goal: (usize, Point2D),
}

impl<'a> Graph<'a> {
    fn new(cm: &'a Costmap, start: &Point2D, goal: &Point2D, opts: &PlannerOptions) -> Result<Self, PlanningError> {
        let blocked: Vec<bool> = (0..cm.len())
            .map(|i| cm.cost_at_index(i) == LETHAL || opts.clearance.is_some_and(|c| cm.distance_at_index(i) <= c))
            .collect();
        let locate = |p: &Point2D| cm.cell_of(p).map(|(c, r)| cm.index(c, r)).filter(|&i| !blocked[i]);
        let s = locate(start).ok_or(PlanningError::StartBlocked(start.x, start.y))?;
        let g = locate(goal).ok_or(PlanningError::GoalBlocked(goal.x, goal.y))?;
        Ok(Self {
            cm,
            blocked,
            start: (s, *start),
            goal: (g, *goal),
        })
    }

    fn pos(&self, idx: usize) -> Point2D {
        if idx == self.goal.0 {
            self.goal.1
        } else if idx == self.start.0 {
            self.start.1
        } else {
            let (c, r) = self.cm.coords(idx);
            self.cm.center(c, r)
        }
    }

    fn free(&self, c: i64, r: i64) -> Option<usize> {
        if c < 0 || r < 0 || c as usize >= self.cm.cols() || r as usize >= self.cm.rows() {
            return None;
        }
        let i = self.cm.index(c as usize, r as usize);
        (!self.blocked[i]).then_some(i)
    }

    /// Traversable neighbours with edge lengths, in fixed order.
    fn neighbors(&self, idx: usize, out: &mut Vec<(usize, f64)>) {
        out.clear();
        let (c, r) = self.cm.coords(idx);
        let (c, r) = (c as i64, r as i64);
        let here = self.pos(idx);
        for (dc, dr) in NEIGHBORS {
            let Some(n) = self.free(c + dc, r + dr) else { continue };
            if dc != 0 && dr != 0 && (self.free(c + dc, r).is_none() || self.free(c, r + dr).is_none()) {
                continue;
            }
            out.push((n, here.distance(&self.pos(n))));
        }
    }

    fn visible(&self, a: &Point2D, b: &Point2D) -> bool {
        supercover(self.cm, a, b, |c, r| !self.blocked[self.cm.index(c, r)])
    }

    fn trivial(&self, kind: PlannerKind) -> Option<PlannedPath> {
        (self.start.0 == self.goal.0).then(|| {
            let pts = if self.start.1 == self.goal.1 {
                vec![self.start.1]
            } else {
                vec![self.start.1, self.goal.1]
            };
            PlannedPath::new(kind, pts)
        })
    }
}

/// Open-list entry: lowest `f` first, then lowest `h`, then lowest cell index.
#[derive(Debug, Clone, Copy)]
struct Open {
    f: f64,
    h: f64,
    idx: usize,
}

impl PartialEq for Open {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Open {}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Open {
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| other.h.total_cmp(&self.h))
            .then_with(|| other.idx.cmp(&self.idx))
    }
}

/// Distance-to-goal potential over the whole reachable graph (`∞` where unreachable).
fn wavefront(graph: &Graph) -> Vec<f64> {
    let mut pot = vec![f64::INFINITY; graph.cm.len()];
    let mut done = vec![false; graph.cm.len()];
    let mut heap = BinaryHeap::new();
    let mut nb = Vec::with_capacity(8);
    pot[graph.goal.0] = 0.0;
    heap.push(Open { f: 0.0, h: 0.0, idx: graph.goal.0 });
    while let Some(Open { idx, .. }) = heap.pop() {
        if done[idx] {
            continue;
        }
        done[idx] = true;
        graph.neighbors(idx, &mut nb);
        for &(n, w) in &nb {
            let cand = pot[idx] + w;
            if cand < pot[n] {
                pot[n] = cand;
                heap.push(Open { f: cand, h: 0.0, idx: n });
            }
        }
    }
    pot
}

/// Wavefront expansion from the goal, then descent from the start along the potential.
pub fn dijkstra_plan(
    cm: &Costmap,
    start: &Point2D,
    goal: &Point2D,
    opts: &PlannerOptions,
) -> Result<PlannedPath, PlanningError> {
    let graph = Graph::new(cm, start, goal, opts)?;
    if let Some(p) = graph.trivial(PlannerKind::Dijkstra) {
        return Ok(p);
    }
    let pot = wavefront(&graph);
    if !pot[graph.start.0].is_finite() {
        return Err(PlanningError::NoPath);
    }
    let mut cells = vec![graph.start.0];
    let mut cur = graph.start.0;
    let mut nb = Vec::with_capacity(8);
    while cur != graph.goal.0 {
        graph.neighbors(cur, &mut nb);
        let next = nb
            .iter()
            .filter(|(n, _)| pot[*n].is_finite())
            .min_by(|a, b| (pot[a.0] + a.1).total_cmp(&(pot[b.0] + b.1)).then(a.0.cmp(&b.0)))
            .map(|&(n, _)| n)
            .ok_or(PlanningError::NoPath)?;
        if pot[next] >= pot[cur] {
            return Err(PlanningError::NoPath);
        }
        cells.push(next);
        cur = next;
    }
    Ok(PlannedPath::new(PlannerKind::Dijkstra, cells.iter().map(|&i| graph.pos(i)).collect()))
}

struct Search {
    g: Vec<f64>,
    parent: Vec<usize>,
    closed: Vec<bool>,
}

fn trace(graph: &Graph, parent: &[usize]) -> Vec<Point2D> {
    let mut cells = vec![graph.goal.0];
    let mut cur = graph.goal.0;
    while cur != graph.start.0 {
        cur = parent[cur];
        cells.push(cur);
    }
    cells.reverse();
    cells.iter().map(|&i| graph.pos(i)).collect()
}

fn best_first(graph: &Graph, any_angle: bool) -> Option<Search> {
    let n = graph.cm.len();
    let mut s = Search {
        g: vec![f64::INFINITY; n],
        parent: vec![usize::MAX; n],
        closed: vec![false; n],
    };
    let goal = graph.goal.1;
    let h = |i: usize| graph.pos(i).distance(&goal);
    let start = graph.start.0;
    s.g[start] = 0.0;
    s.parent[start] = start;
    let mut heap = BinaryHeap::new();
    heap.push(Open { f: h(start), h: h(start), idx: start });
    let mut nb = Vec::with_capacity(8);
    while let Some(Open { idx, .. }) = heap.pop() {
        if s.closed[idx] {
            continue;
        }
        if idx == graph.goal.0 {
            return Some(s);
        }
        s.closed[idx] = true;
        graph.neighbors(idx, &mut nb);
        let up = s.parent[idx];
        let up_pos = graph.pos(up);
        for &(m, w) in &nb {
            if s.closed[m] {
                continue;
            }
            let there = graph.pos(m);
            let (cand, via) = if any_angle && up != idx && graph.visible(&up_pos, &there) {
                (s.g[up] + up_pos.distance(&there), up)
            } else {
                (s.g[idx] + w, idx)
            };
            if cand < s.g[m] {
                s.g[m] = cand;
                s.parent[m] = via;
                let hm = h(m);
                heap.push(Open { f: cand + hm, h: hm, idx: m });
            }
        }
    }
    None
}

/// Grid A* with the Euclidean heuristic.
pub fn astar_plan(
    cm: &Costmap,
    start: &Point2D,
    goal: &Point2D,
    opts: &PlannerOptions,
) -> Result<PlannedPath, PlanningError> {
    let graph = Graph::new(cm, start, goal, opts)?;
    if let Some(p) = graph.trivial(PlannerKind::Astar) {
        return Ok(p);
    }
    let s = best_first(&graph, false).ok_or(PlanningError::NoPath)?;
    Ok(PlannedPath::new(PlannerKind::Astar, trace(&graph, &s.parent)))
}

/// Basic Theta*: a successor inherits its predecessor's parent whenever that parent sees it.
pub fn theta_star_plan(
    cm: &Costmap,
    start: &Point2D,
    goal: &Point2D,
    opts: &PlannerOptions,
) -> Result<PlannedPath, PlanningError> {
    let graph = Graph::new(cm, start, goal, opts)?;
    if let Some(p) = graph.trivial(PlannerKind::ThetaStar) {
        return Ok(p);
    }
    let s = best_first(&graph, true).ok_or(PlanningError::NoPath)?;
    Ok(PlannedPath::new(PlannerKind::ThetaStar, trace(&graph, &s.parent)))
}

pub fn plan(
    kind: PlannerKind,
    cm: &Costmap,
    start: &Point2D,
    goal: &Point2D,
    opts: &PlannerOptions,
) -> Result<PlannedPath, PlanningError> {
    match kind {
        PlannerKind::Dijkstra => dijkstra_plan(cm, start, goal, opts),
        PlannerKind::Astar => astar_plan(cm, start, goal, opts),
        PlannerKind::ThetaStar => theta_star_plan(cm, start, goal, opts),
    }
}
