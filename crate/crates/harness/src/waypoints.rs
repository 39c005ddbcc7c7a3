use omninav::world::{Machine, WorldMap};
use omninav::{Point2D, Pose2D};
use rand::Rng;

use crate::config::WaypointConfig;
use crate::HarnessError;

/// Pose `standoff` metres out from the centre of one side of `machine`, facing it.
/// Sides 0 and 1 are the ends along the machine's length (+x, -x in its frame), 2 and 3
/// the long faces (+y, -y).
pub fn side_waypoint(machine: &Machine, side: usize, standoff: f64) -> Pose2D {
    let r = &machine.rect;
    let (normal, half) = match side % 4 {
        0 => (Point2D::new(1.0, 0.0), r.half_length),
        1 => (Point2D::new(-1.0, 0.0), r.half_length),
        2 => (Point2D::new(0.0, 1.0), r.half_width),
        _ => (Point2D::new(0.0, -1.0), r.half_width),
    };
    let out = normal.rotate(r.theta);
    let p = r.center + out.scale(half + standoff);
    Pose2D::new(p.x, p.y, (-out.y).atan2(-out.x))
}

/// Draws `n` waypoints at uniformly chosen machine sides. A draw is rejected when it is
/// closer than `min_clearance` to any obstacle, outside the field, or within
/// `min_spacing` of a waypoint already chosen for this path or listed in `taken`.
pub fn generate_waypoints<R: Rng + ?Sized>(
    map: &WorldMap,
    rng: &mut R,
    n: usize,
    cfg: &WaypointConfig,
    taken: &[Pose2D],
) -> Result<Vec<Pose2D>, HarnessError> {
    let machines = map.machines();
    if machines.is_empty() {
        return Err(HarnessError::Config("waypoints need at least one machine".into()));
    }
    let mut chosen: Vec<Pose2D> = Vec::with_capacity(n);
    let mut attempts = 0;
    while chosen.len() < n {
        if attempts == cfg.attempts {
            return Err(HarnessError::Config(format!(
                "no valid waypoint set after {} draws ({} of {n} placed)",
                cfg.attempts,
                chosen.len()
            )));
        }
        attempts += 1;
        let m = rng.random_range(0..machines.len());
        let side = rng.random_range(0..4);
        let w = side_waypoint(&machines[m], side, cfg.standoff);
        let p = w.position();
        let valid = map.in_field(&p)
            && map.distance_to_obstacles(&p) >= cfg.min_clearance
            && chosen.iter().chain(taken).all(|o| o.position().distance(&p) >= cfg.min_spacing);
        if valid {
            chosen.push(w);
        }
    }
    Ok(chosen)
}
