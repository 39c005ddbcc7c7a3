use serde::{Deserialize, Serialize};

use super::LocalizationError;
use crate::world::WorldMap;
use crate::Point2D;

/// Mixture parameters of the beam-endpoint sensor model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SensorModel {
    pub sigma_hit: f64,
    pub z_hit: f64,
    pub z_rand: f64,
    /// Only every `beam_stride`-th merged scan point is scored.
    pub beam_stride: usize,
}

impl Default for SensorModel {
    fn default() -> Self {
        Self {
            sigma_hit: 0.1,
            z_hit: 0.95,
            z_rand: 0.05,
            beam_stride: 5,
        }
    }
}

impl SensorModel {
    pub fn validate(&self) -> Result<(), LocalizationError> {
        let ok = self.sigma_hit > 0.0
            && self.z_hit >= 0.0
            && self.z_rand >= 0.0
            && self.z_hit + self.z_rand <= 1.0 + 1e-12
            && self.z_hit + self.z_rand > 0.0
            && self.beam_stride > 0;
        if ok {
            Ok(())
        } else {
            Err(LocalizationError::InvalidSensorModel(format!("{self:?}")))
        }
    }
}

/// Distance to the nearest mapped obstacle sampled on a regular grid.
///
/// The grid covers the field plus `margin` on every side. Lookups between cell
/// centres are bilinear; points outside the grid read as `max_distance`.
#[derive(Debug, Clone)]
pub struct LikelihoodField {
    pub model: SensorModel,
    origin: Point2D,
    resolution: f64,
    cols: usize,
    rows: usize,
    distances: Vec<f64>,
    max_distance: f64,
}

impl LikelihoodField {
    pub fn build(map: &WorldMap, resolution: f64, model: SensorModel) -> Result<Self, LocalizationError> {
        model.validate()?;
        if !(resolution > 0.0) {
            return Err(LocalizationError::InvalidSensorModel(format!("resolution {resolution}")));
        }
        let margin = 0.5;
        let origin = Point2D::new(-margin, -margin);
        let cols = ((map.width() + 2.0 * margin) / resolution).ceil() as usize + 1;
        let rows = ((map.height() + 2.0 * margin) / resolution).ceil() as usize + 1;
        let mut distances = Vec::with_capacity(cols * rows);
        for r in 0..rows {
            for c in 0..cols {
                let p = Point2D::new(origin.x + c as f64 * resolution, origin.y + r as f64 * resolution);
                distances.push(map.distance_to_obstacles(&p));
            }
        }
        let max_distance = distances.iter().cloned().fold(0.0, f64::max);
        Ok(Self {
            model,
            origin,
            resolution,
            cols,
            rows,
            distances,
            max_distance,
        })
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.cols, self.rows)
    }

    /// Sample `(col, row)`; grid nodes sit at `origin + (col, row) * resolution`.
    pub fn node(&self, col: usize, row: usize) -> f64 {
        self.distances[row * self.cols + col]
    }

    pub fn distance(&self, p: &Point2D) -> f64 {
        let fx = (p.x - self.origin.x) / self.resolution;
        let fy = (p.y - self.origin.y) / self.resolution;
        if !(fx >= 0.0 && fy >= 0.0) {
            return self.max_distance;
        }
        let (c, r) = (fx.floor() as usize, fy.floor() as usize);
        if c + 1 >= self.cols || r + 1 >= self.rows {
            return self.max_distance;
        }
        let (tx, ty) = (fx - c as f64, fy - r as f64);
        let i = r * self.cols + c;
        let d = &self.distances;
        let bottom = d[i] * (1.0 - tx) + d[i + 1] * tx;
        let top = d[i + self.cols] * (1.0 - tx) + d[i + self.cols + 1] * tx;
        bottom * (1.0 - ty) + top * ty
    }

    /// Log of the mixture density for an endpoint at distance `d` from the map.
    pub fn log_likelihood(&self, d: f64, max_range: f64) -> f64 {
        let m = &self.model;
        let s = m.sigma_hit;
        let hit = (-0.5 * (d / s) * (d / s)).exp() / (s * (2.0 * std::f64::consts::PI).sqrt());
        (m.z_hit * hit + m.z_rand / max_range).ln()
    }
}
