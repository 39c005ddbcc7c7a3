use serde::{Deserialize, Serialize};

use super::PlanningError;
use crate::world::WorldMap;
use crate::Point2D;

pub const LETHAL: u8 = 254;
pub const MAX_NON_LETHAL: u8 = 253;
pub const FREE: u8 = 0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CostmapParams {
    pub resolution: f64,
    pub robot_radius: f64,
    pub inflation_radius: f64,
}

impl Default for CostmapParams {
    fn default() -> Self {
        Self {
            resolution: 0.05,
            robot_radius: 0.23,
            inflation_radius: 0.6,
        }
    }
}

impl CostmapParams {
    /// Decay rate that brings the inflation cost down to 1 at the inflation radius.
    pub fn decay(&self) -> f64 {
        (MAX_NON_LETHAL as f64).ln() / (self.inflation_radius - self.robot_radius)
    }

    /// Cost for a cell whose centre is `d` metres from the nearest obstacle.
    pub fn cost_for_distance(&self, d: f64) -> u8 {
        if d <= self.robot_radius {
            LETHAL
        } else if d > self.inflation_radius {
            FREE
        } else {
            let c = MAX_NON_LETHAL as f64 * (-self.decay() * (d - self.robot_radius)).exp();
            c.round().clamp(1.0, MAX_NON_LETHAL as f64) as u8
        }
    }
}

/// Static occupancy grid over the field. Cell `(col, row)` covers
/// `[col·res, (col+1)·res) × [row·res, (row+1)·res)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Costmap {
    params: CostmapParams,
    cols: usize,
    rows: usize,
    costs: Vec<u8>,
    /// Distance from each cell centre to the nearest obstacle.
    distances: Vec<f64>,
}

fn cell_count(extent: f64, res: f64) -> usize {
    let n = extent / res;
    if (n - n.round()).abs() < 1e-9 {
        n.round() as usize
    } else {
        n.ceil() as usize
    }
}

pub fn build_costmap(map: &WorldMap, params: CostmapParams) -> Result<Costmap, PlanningError> {
    if !(params.resolution > 0.0 && params.resolution.is_finite()) {
        return Err(PlanningError::InvalidParams(format!("resolution {}", params.resolution)));
    }
    if !(params.robot_radius >= 0.0 && params.inflation_radius > params.robot_radius) {
        return Err(PlanningError::InvalidParams(format!(
            "robot radius {} must be below inflation radius {}",
            params.robot_radius, params.inflation_radius
        )));
    }
    let res = params.resolution;
    let cols = cell_count(map.width(), res);
    let rows = cell_count(map.height(), res);
    let mut distances = Vec::with_capacity(cols * rows);
    for r in 0..rows {
        for c in 0..cols {
            let p = Point2D::new((c as f64 + 0.5) * res, (r as f64 + 0.5) * res);
            distances.push(map.distance_to_obstacles(&p));
        }
    }
    Ok(Costmap::from_distances(params, cols, rows, distances))
}

impl Costmap {
    /// Builds a grid from precomputed per-cell obstacle distances (row-major).
    pub fn from_distances(params: CostmapParams, cols: usize, rows: usize, distances: Vec<f64>) -> Self {
        assert_eq!(distances.len(), cols * rows);
        let costs = distances.iter().map(|&d| params.cost_for_distance(d)).collect();
        Self {
            params,
            cols,
            rows,
            costs,
            distances,
        }
    }

    pub fn params(&self) -> &CostmapParams {
        &self.params
    }

    pub fn resolution(&self) -> f64 {
        self.params.resolution
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn len(&self) -> usize {
        self.costs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.costs.is_empty()
    }

    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    pub fn coords(&self, idx: usize) -> (usize, usize) {
        (idx % self.cols, idx / self.cols)
    }

    pub fn cell_of(&self, p: &Point2D) -> Option<(usize, usize)> {
        let res = self.params.resolution;
        let (fx, fy) = (p.x / res, p.y / res);
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        let (c, r) = (fx.floor() as usize, fy.floor() as usize);
        (c < self.cols && r < self.rows).then_some((c, r))
    }

    pub fn center(&self, col: usize, row: usize) -> Point2D {
        let res = self.params.resolution;
        Point2D::new((col as f64 + 0.5) * res, (row as f64 + 0.5) * res)
    }

    pub fn cost(&self, col: usize, row: usize) -> u8 {
        self.costs[self.index(col, row)]
    }

    pub fn cost_at_index(&self, idx: usize) -> u8 {
        self.costs[idx]
    }

    pub fn distance(&self, col: usize, row: usize) -> f64 {
        self.distances[self.index(col, row)]
    }

    pub fn distance_at_index(&self, idx: usize) -> f64 {
        self.distances[idx]
    }

    /// Copy with extra circular obstacles given as (centre, radius).
    pub fn with_discs(&self, discs: &[(Point2D, f64)]) -> Costmap {
        let mut distances = self.distances.clone();
        for (idx, d) in distances.iter_mut().enumerate() {
            let (c, r) = self.coords(idx);
            let p = self.center(c, r);
            for (centre, radius) in discs {
                *d = d.min((p.distance(centre) - radius).max(0.0));
            }
        }
        Costmap::from_distances(self.params, self.cols, self.rows, distances)
    }

    pub fn is_lethal(&self, col: usize, row: usize) -> bool {
        self.cost(col, row) == LETHAL
    }

    /// Cost at a world point; points off the grid are lethal.
    /// Flat index of the cell containing `p`, if it is on the grid.
    #[inline]
    pub fn index_at(&self, p: &Point2D) -> Option<usize> {
        let res = self.params.resolution;
        let (fx, fy) = (p.x / res, p.y / res);
        if !(fx >= 0.0 && fy >= 0.0) {
            return None;
        }
        // truncation equals floor for non-negative values
        let (c, r) = (fx as usize, fy as usize);
        (c < self.cols && r < self.rows).then_some(r * self.cols + c)
    }

    #[inline]
    pub fn cost_at(&self, p: &Point2D) -> u8 {
        self.index_at(p).map_or(LETHAL, |i| self.costs[i])
    }

    pub fn costs(&self) -> &[u8] {
        &self.costs
    }
}
