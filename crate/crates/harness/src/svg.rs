//! Minimal SVG rendering of the field, waypoints, driven paths and planner output.

use std::fmt::Write;

use omninav::planning::{PlannedPath, PlannerKind};
use omninav::world::WorldMap;
use omninav::{Point2D, Pose2D};

use crate::experiment::RunRecord;

const SCALE: f64 = 80.0;
const MARGIN: f64 = 20.0;

/// Base colour per robot.
pub const ROBOT_COLORS: [(u8, u8, u8); 6] = [(214, 39, 40), (44, 160, 44), (31, 119, 180), (255, 127, 14), (148, 103, 189), (140, 86, 75)];

pub fn robot_color(robot: usize) -> (u8, u8, u8) {
    ROBOT_COLORS[robot % ROBOT_COLORS.len()]
}

/// `base` blended towards white; repetition 0 keeps the full colour.
pub fn shade(base: (u8, u8, u8), rep: usize, reps: usize) -> String {
    let f = if reps <= 1 { 0.0 } else { 0.6 * rep as f64 / (reps - 1) as f64 };
    let mix = |c: u8| (c as f64 + (255.0 - c as f64) * f).round() as u8;
    format!("#{:02x}{:02x}{:02x}", mix(base.0), mix(base.1), mix(base.2))
}

struct Canvas {
    height_m: f64,
    body: String,
}

impl Canvas {
    fn new(map: &WorldMap) -> Self {
        let mut c = Self { height_m: map.height(), body: String::new() };
        let (w, h) = (map.width() * SCALE + 2.0 * MARGIN, map.height() * SCALE + 2.0 * MARGIN);
        let _ = writeln!(
            c.body,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w:.0}" height="{h:.0}" viewBox="0 0 {w:.0} {h:.0}">"#
        );
        let _ = writeln!(c.body, r#"<rect x="0" y="0" width="{w:.0}" height="{h:.0}" fill="white"/>"#);
        let _ = writeln!(
            c.body,
            r#"<rect x="{MARGIN}" y="{MARGIN}" width="{:.1}" height="{:.1}" fill="none" stroke="black" stroke-width="2"/>"#,
            map.width() * SCALE,
            map.height() * SCALE
        );
        for m in map.machines() {
            let pts = m.rect.corners().iter().map(|p| c.xy(p)).collect::<Vec<_>>().join(" ");
            let _ = writeln!(c.body, r##"<polygon points="{pts}" fill="#888888" stroke="black"/>"##);
            let (x, y) = c.px(&m.rect.center);
            let _ = writeln!(c.body, r#"<text x="{x:.1}" y="{y:.1}" font-size="10" text-anchor="middle" fill="white">{}</text>"#, m.id);
        }
        c
    }

    fn px(&self, p: &Point2D) -> (f64, f64) {
        (MARGIN + p.x * SCALE, MARGIN + (self.height_m - p.y) * SCALE)
    }

    fn xy(&self, p: &Point2D) -> String {
        let (x, y) = self.px(p);
        format!("{x:.1},{y:.1}")
    }

    fn polyline(&mut self, pts: &[Point2D], color: &str, width: f64, label: &str) {
        let coords = pts.iter().map(|p| self.xy(p)).collect::<Vec<_>>().join(" ");
        let _ = writeln!(
            self.body,
            r#"<polyline class="{label}" points="{coords}" fill="none" stroke="{color}" stroke-width="{width}"/>"#
        );
    }

    fn pose_marker(&mut self, pose: &Pose2D, color: &str, label: &str) {
        let (x, y) = self.px(&pose.position());
        let tip = self.px(&(pose.position() + Point2D::new(pose.theta.cos(), pose.theta.sin()).scale(0.25)));
        let _ = writeln!(self.body, r#"<circle cx="{x:.1}" cy="{y:.1}" r="5" fill="none" stroke="{color}" stroke-width="2"/>"#);
        let _ = writeln!(
            self.body,
            r#"<line x1="{x:.1}" y1="{y:.1}" x2="{:.1}" y2="{:.1}" stroke="{color}" stroke-width="2"/>"#,
            tip.0,
            tip.1
        );
        let _ = writeln!(self.body, r#"<text x="{:.1}" y="{:.1}" font-size="11" fill="{color}">{label}</text>"#, x + 6.0, y - 6.0);
    }

    fn finish(mut self) -> String {
        self.body.push_str("</svg>\n");
        self.body
    }
}

/// One path's plot: waypoints per robot and one driven polyline per robot and repetition.
pub fn path_plot(map: &WorldMap, waypoints: &[Vec<Pose2D>], records: &[&RunRecord]) -> String {
    let mut c = Canvas::new(map);
    let reps = records.iter().map(|r| r.rep + 1).max().unwrap_or(1);
    for r in records {
        let pts: Vec<Point2D> = r.trajectory.iter().map(|s| s.truth.position()).collect();
        let color = shade(robot_color(r.robot), r.rep, reps);
        c.polyline(&pts, &color, 1.5, &format!("robot{} rep{}", r.robot, r.rep));
    }
    for (robot, ws) in waypoints.iter().enumerate() {
        let color = shade(robot_color(robot), 0, 1);
        for (k, w) in ws.iter().enumerate() {
            c.pose_marker(w, &color, &format!("R{}.{}", robot + 1, k));
        }
    }
    c.finish()
}

pub fn planner_color(kind: PlannerKind) -> &'static str {
    match kind {
        PlannerKind::Dijkstra => "#1f77b4",
        PlannerKind::Astar => "#2ca02c",
        PlannerKind::ThetaStar => "#d62728",
    }
}

/// Overlay of planner outputs between `start` and `goal`.
pub fn planner_plot(map: &WorldMap, paths: &[PlannedPath], start: &Point2D, goal: &Point2D) -> String {
    let mut c = Canvas::new(map);
    for (k, p) in paths.iter().enumerate() {
        c.polyline(&p.points, planner_color(p.planner), 2.5, p.planner.as_str());
        let _ = writeln!(
            c.body,
            r#"<text x="{MARGIN}" y="{:.1}" font-size="13" fill="{}">{}: length {:.3} m, {} segments</text>"#,
            MARGIN + 16.0 * (k + 1) as f64,
            planner_color(p.planner),
            p.planner,
            p.length,
            p.segment_count()
        );
    }
    c.pose_marker(&Pose2D::new(start.x, start.y, 0.0), "black", "start");
    c.pose_marker(&Pose2D::new(goal.x, goal.y, 0.0), "black", "goal");
    c.finish()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::experiment::TrajectorySample;

    fn record(robot: usize, rep: usize, n: usize) -> RunRecord {
        RunRecord {
            experiment: "E2".into(),
            path: 0,
            rep,
            robot,
            legs: Vec::new(),
            collisions: 0,
            machine_collisions: 0,
            robot_collisions: 0,
            recoveries: 0,
            replans: 0,
            trajectory: (0..n)
                .map(|k| {
                    let p = Pose2D::new(1.0 + 0.1 * k as f64, 1.0 + robot as f64, 0.0);
                    TrajectorySample { t: k as f64, truth: p, estimate: p }
                })
                .collect(),
        }
    }

    #[test]
    fn empty_trajectory_gives_map_only() {
        let map = WorldMap::default_rcll();
        let svg = path_plot(&map, &[], &[]);
        assert!(svg.starts_with("<svg") && svg.ends_with("</svg>\n"));
        assert!(!svg.contains("<polyline"));
        assert_eq!(svg.matches("<polygon").count(), map.machines().len());
    }

    #[test]
    fn three_robots_three_colors() {
        let map = WorldMap::default_rcll();
        let recs: Vec<RunRecord> = (0..3).map(|r| record(r, 0, 5)).collect();
        let refs: Vec<&RunRecord> = recs.iter().collect();
        let svg = path_plot(&map, &[], &refs);
        for r in 0..3 {
            assert!(svg.contains(&shade(robot_color(r), 0, 1)));
        }
    }

    #[test]
    fn polyline_has_one_point_per_sample() {
        let map = WorldMap::default_rcll();
        let rec = record(0, 0, 17);
        let svg = path_plot(&map, &[], &[&rec]);
        let line = svg.lines().find(|l| l.starts_with("<polyline")).unwrap();
        let points = line.split("points=\"").nth(1).unwrap().split('"').next().unwrap();
        assert_eq!(points.split_whitespace().count(), 17);
    }

    #[test]
    fn later_repetitions_are_lighter() {
        assert_eq!(shade((200, 0, 0), 0, 5), "#c80000");
        assert_eq!(shade((0, 0, 0), 4, 5), "#999999");
    }
}
