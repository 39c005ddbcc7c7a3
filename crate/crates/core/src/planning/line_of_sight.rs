use super::costmap::Costmap;
use crate::Point2D;

/// Visits every cell the segment `a -> b` touches, including both cells at an exact
/// corner crossing. Stops early and returns `false` as soon as `visit` does, or when the
/// segment leaves the grid.
pub fn supercover<F: FnMut(usize, usize) -> bool>(cm: &Costmap, a: &Point2D, b: &Point2D, mut visit: F) -> bool {
    let res = cm.resolution();
    let (ax, ay, bx, by) = (a.x / res, a.y / res, b.x / res, b.y / res);
    let inside = |x: i64, y: i64| x >= 0 && y >= 0 && (x as usize) < cm.cols() && (y as usize) < cm.rows();
    let (mut cx, mut cy) = (ax.floor() as i64, ay.floor() as i64);
    let (ex, ey) = (bx.floor() as i64, by.floor() as i64);
    if !inside(cx, cy) || !inside(ex, ey) {
        return false;
    }
    if !visit(cx as usize, cy as usize) {
        return false;
    }
    let (dx, dy) = (bx - ax, by - ay);
    let sx = if dx > 0.0 { 1 } else if dx < 0.0 { -1 } else { 0 };
    let sy = if dy > 0.0 { 1 } else if dy < 0.0 { -1 } else { 0 };
    let t_delta_x = if sx != 0 { 1.0 / dx.abs() } else { f64::INFINITY };
    let t_delta_y = if sy != 0 { 1.0 / dy.abs() } else { f64::INFINITY };
    let mut t_max_x = match sx {
        1 => (cx as f64 + 1.0 - ax) / dx,
        -1 => (ax - cx as f64) / -dx,
        _ => f64::INFINITY,
    };
    let mut t_max_y = match sy {
        1 => (cy as f64 + 1.0 - ay) / dy,
        -1 => (ay - cy as f64) / -dy,
        _ => f64::INFINITY,
    };
    let limit = (ex - cx).abs() + (ey - cy).abs() + 2;
    let mut steps = 0;
    while (cx, cy) != (ex, ey) && steps < limit {
        steps += 1;
        if (t_max_x - t_max_y).abs() <= 1e-9 {
            // the segment passes exactly through a cell corner
            for (x, y) in [(cx + sx, cy), (cx, cy + sy)] {
                if !inside(x, y) || !visit(x as usize, y as usize) {
                    return false;
                }
            }
            cx += sx;
            cy += sy;
            t_max_x += t_delta_x;
            t_max_y += t_delta_y;
        } else if t_max_x < t_max_y {
            cx += sx;
            t_max_x += t_delta_x;
        } else {
            cy += sy;
            t_max_y += t_delta_y;
        }
        if !inside(cx, cy) || !visit(cx as usize, cy as usize) {
            return false;
        }
    }
    true
}

/// True when the supercover traversal from `a` to `b` touches no lethal cell.
pub fn line_of_sight(cm: &Costmap, a: &Point2D, b: &Point2D) -> bool {
    supercover(cm, a, b, |c, r| !cm.is_lethal(c, r))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planning::costmap::CostmapParams;

    pub(crate) fn grid(cols: usize, rows: usize, blocked: &[(usize, usize)]) -> Costmap {
        let mut d = vec![10.0; cols * rows];
        for &(c, r) in blocked {
            d[r * cols + c] = 0.0;
        }
        Costmap::from_distances(CostmapParams { resolution: 1.0, robot_radius: 0.23, inflation_radius: 0.6 }, cols, rows, d)
    }

    fn touched(cm: &Costmap, a: Point2D, b: Point2D) -> Vec<(usize, usize)> {
        let mut v = Vec::new();
        supercover(cm, &a, &b, |c, r| {
            v.push((c, r));
            true
        });
        v.sort();
        v
    }

    #[test]
    fn same_cell_is_visible() {
        let cm = grid(3, 3, &[(1, 1)]);
        assert!(line_of_sight(&cm, &Point2D::new(0.2, 0.2), &Point2D::new(0.8, 0.7)));
    }

    #[test]
    fn lethal_cell_blocks() {
        let cm = grid(5, 1, &[(2, 0)]);
        assert!(!line_of_sight(&cm, &Point2D::new(0.5, 0.5), &Point2D::new(4.5, 0.5)));
        assert!(line_of_sight(&cm, &Point2D::new(0.5, 0.5), &Point2D::new(1.5, 0.5)));
    }

    #[test]
    fn corner_squeeze_is_blocked() {
        let cm = grid(3, 3, &[(1, 0), (0, 1)]);
        assert!(!line_of_sight(&cm, &Point2D::new(0.5, 0.5), &Point2D::new(1.5, 1.5)));
        // enumerated by hand: the diagonal through the corner (1,1) touches all four cells
        let free = grid(3, 3, &[]);
        assert_eq!(
            touched(&free, Point2D::new(0.5, 0.5), Point2D::new(1.5, 1.5)),
            vec![(0, 0), (0, 1), (1, 0), (1, 1)]
        );
        assert_eq!(
            touched(&free, Point2D::new(0.5, 0.5), Point2D::new(2.5, 2.5)),
            vec![(0, 0), (0, 1), (1, 0), (1, 1), (1, 2), (2, 1), (2, 2)]
        );
    }

    #[test]
    fn shallow_segment_cells() {
        let free = grid(4, 2, &[]);
        // from (0.5,0.5) to (3.5,1.5): crosses y=1 at x=2, exactly on a vertical line
        assert_eq!(
            touched(&free, Point2D::new(0.5, 0.5), Point2D::new(3.5, 1.5)),
            vec![(0, 0), (1, 0), (1, 1), (2, 0), (2, 1), (3, 1)]
        );
        assert_eq!(
            touched(&free, Point2D::new(0.5, 0.2), Point2D::new(3.5, 0.9)),
            vec![(0, 0), (1, 0), (2, 0), (3, 0)]
        );
    }

    #[test]
    fn symmetric_in_direction() {
        let free = grid(6, 6, &[]);
        let pts = [(0.3, 0.7), (5.5, 2.5), (2.5, 5.9), (4.1, 0.1), (1.5, 1.5)];
        for a in pts {
            for b in pts {
                let (pa, pb) = (Point2D::new(a.0, a.1), Point2D::new(b.0, b.1));
                assert_eq!(touched(&free, pa, pb), touched(&free, pb, pa));
            }
        }
    }

    #[test]
    fn leaving_the_grid_fails() {
        let free = grid(3, 3, &[]);
        assert!(!line_of_sight(&free, &Point2D::new(0.5, 0.5), &Point2D::new(3.5, 0.5)));
    }
}
