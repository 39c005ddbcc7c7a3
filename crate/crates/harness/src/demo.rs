//! Planner comparison on a small two-machine slalom.

use omninav::planning::{build_costmap, plan, CostmapParams, PlannedPath, PlannerKind, PlannerOptions};
use omninav::world::{MapFile, WorldMap};
use omninav::Point2D;

use crate::svg::planner_plot;
use crate::HarnessError;

pub const DEMO_MAP: &str = include_str!("../maps/plan_demo.json");
pub const DEMO_START: (f64, f64) = (0.7, 0.6);
pub const DEMO_GOAL: (f64, f64) = (5.3, 1.0);

pub fn demo_map() -> WorldMap {
    let file: MapFile = serde_json::from_str(DEMO_MAP).expect("bundled demo map parses");
    WorldMap::from_file(&file).expect("bundled demo map is valid")
}

#[derive(Debug, Clone)]
pub struct DemoResult {
    pub paths: Vec<PlannedPath>,
    pub svg: String,
}

/// Plans with every planner in `kinds` on the lethal-only costmap and renders the overlay.
pub fn plan_demo(
    map: &WorldMap,
    kinds: &[PlannerKind],
    start: Point2D,
    goal: Point2D,
    params: CostmapParams,
) -> Result<DemoResult, HarnessError> {
    let cm = build_costmap(map, params).map_err(|e| HarnessError::Config(e.to_string()))?;
    let paths = kinds
        .iter()
        .map(|k| plan(*k, &cm, &start, &goal, &PlannerOptions::default()).map_err(|e| HarnessError::Planning(k.to_string(), e)))
        .collect::<Result<Vec<_>, _>>()?;
    let svg = planner_plot(map, &paths, &start, &goal);
    Ok(DemoResult { paths, svg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn any_angle_path_is_straighter() {
        let start = Point2D::new(DEMO_START.0, DEMO_START.1);
        let goal = Point2D::new(DEMO_GOAL.0, DEMO_GOAL.1);
        let r = plan_demo(&demo_map(), &PlannerKind::ALL, start, goal, CostmapParams::default()).unwrap();
        let by = |k| r.paths.iter().find(|p| p.planner == k).unwrap();
        let theta = by(PlannerKind::ThetaStar);
        assert!(theta.segment_count() <= 3, "{}", theta.segment_count());
        for k in [PlannerKind::Dijkstra, PlannerKind::Astar] {
            assert!(by(k).segment_count() > 3, "{k} {}", by(k).segment_count());
            assert!(theta.length <= by(k).length + 1e-9);
        }
        assert_eq!(r.svg.matches("<polyline").count(), 3);
    }
}
