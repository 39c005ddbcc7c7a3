//! CSV artifacts of an experiment.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::experiment::{ExperimentOutput, RunOutput, RunRecord};
use crate::svg::path_plot;
use crate::HarnessError;

pub const TIMINGS_FILE: &str = "timings.csv";
pub const RUNS_FILE: &str = "runs.csv";
pub const WAYPOINTS_FILE: &str = "waypoints.csv";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub experiment: String,
    pub path: usize,
    pub rep: usize,
    pub robot: usize,
    pub leg: usize,
    pub t_start: f64,
    pub t_end: f64,
    pub duration: f64,
    pub reached: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRow {
    pub experiment: String,
    pub path: usize,
    pub rep: usize,
    pub robot: usize,
    pub total_time: f64,
    pub legs: usize,
    pub legs_reached: usize,
    pub collisions: usize,
    pub machine_collisions: usize,
    pub robot_collisions: usize,
    pub recoveries: usize,
    pub replans: usize,
    /// Largest ground-truth position error over the reached waypoints.
    pub max_error_xy: f64,
    pub max_error_yaw: f64,
}

impl RunRow {
    pub fn from_record(r: &RunRecord) -> Self {
        let reached = r.legs.iter().filter(|l| l.reached);
        let (max_error_xy, max_error_yaw) =
            reached.fold((0.0f64, 0.0f64), |(a, b), l| (a.max(l.error_xy), b.max(l.error_yaw)));
        Self {
            experiment: r.experiment.clone(),
            path: r.path,
            rep: r.rep,
            robot: r.robot,
            total_time: r.total_time(),
            legs: r.legs.len(),
            legs_reached: r.legs.len() - r.failed_legs(),
            collisions: r.collisions,
            machine_collisions: r.machine_collisions,
            robot_collisions: r.robot_collisions,
            recoveries: r.recoveries,
            replans: r.replans,
            max_error_xy,
            max_error_yaw,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub t: f64,
    pub robot: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
    pub est_x: f64,
    pub est_y: f64,
    pub est_theta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventRow {
    pub t: f64,
    pub robot: usize,
    pub kind: String,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaypointRow {
    pub path: usize,
    pub robot: usize,
    pub index: usize,
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

fn csv_err(path: &Path, e: impl std::fmt::Display) -> HarnessError {
    HarnessError::Csv(path.display().to_string(), e.to_string())
}

pub fn write_csv<T: Serialize>(path: &Path, rows: impl IntoIterator<Item = T>) -> Result<(), HarnessError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| HarnessError::Io(dir.display().to_string(), e))?;
    }
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.serialize(row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| HarnessError::Io(path.display().to_string(), e))
}

pub fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, HarnessError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_err(path, e))?;
    r.deserialize().map(|row| row.map_err(|e| csv_err(path, e))).collect()
}

pub fn run_dir(out: &Path, path: usize, rep: usize) -> PathBuf {
    out.join("runs").join(format!("path{path}_rep{rep}"))
}

pub fn timing_rows(records: &[&RunRecord]) -> Vec<TimingRow> {
    records
        .iter()
        .flat_map(|r| {
            r.legs.iter().map(|l| TimingRow {
                experiment: r.experiment.clone(),
                path: r.path,
                rep: r.rep,
                robot: r.robot,
                leg: l.leg,
                t_start: l.t_start,
                t_end: l.t_end,
                duration: l.duration,
                reached: l.reached,
            })
        })
        .collect()
}

/// Per-run trajectory and event files.
pub fn write_run(out: &Path, run: &RunOutput) -> Result<(), HarnessError> {
    let dir = run_dir(out, run.path, run.rep);
    let mut rows: Vec<TrajectoryRow> = run
        .records
        .iter()
        .flat_map(|r| {
            r.trajectory.iter().map(|s| TrajectoryRow {
                t: s.t,
                robot: r.robot,
                x: s.truth.x,
                y: s.truth.y,
                theta: s.truth.theta,
                est_x: s.estimate.x,
                est_y: s.estimate.y,
                est_theta: s.estimate.theta,
            })
        })
        .collect();
    rows.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.robot.cmp(&b.robot)));
    write_csv(&dir.join("trajectory.csv"), rows)?;
    write_csv(
        &dir.join("events.csv"),
        run.events.iter().map(|e| EventRow { t: e.t, robot: e.robot, kind: e.kind.clone(), detail: e.detail.clone() }),
    )
}

/// Writes every artifact of `result` below `out`.
pub fn write_experiment(out: &Path, result: &ExperimentOutput, plots: bool) -> Result<(), HarnessError> {
    fs::create_dir_all(out).map_err(|e| HarnessError::Io(out.display().to_string(), e))?;
    let mut records: Vec<&RunRecord> = result.records().collect();
    records.sort_by_key(|r| (r.path, r.rep, r.robot));
    write_csv(&out.join(TIMINGS_FILE), timing_rows(&records))?;
    write_csv(&out.join(RUNS_FILE), records.iter().map(|r| RunRow::from_record(r)))?;
    let wp_rows = result.waypoints.iter().enumerate().flat_map(|(p, robots)| {
        robots.iter().enumerate().flat_map(move |(robot, ws)| {
            ws.iter().enumerate().map(move |(index, w)| WaypointRow { path: p, robot, index, x: w.x, y: w.y, theta: w.theta })
        })
    });
    write_csv(&out.join(WAYPOINTS_FILE), wp_rows)?;
    for run in &result.runs {
        write_run(out, run)?;
    }
    if plots {
        let dir = out.join("plots");
        fs::create_dir_all(&dir).map_err(|e| HarnessError::Io(dir.display().to_string(), e))?;
        for (p, robots) in result.waypoints.iter().enumerate() {
            let recs: Vec<&RunRecord> = records.iter().copied().filter(|r| r.path == p).collect();
            let svg = path_plot(&result.map, robots, &recs);
            let file = dir.join(format!("path{p}.svg"));
            fs::write(&file, svg).map_err(|e| HarnessError::Io(file.display().to_string(), e))?;
        }
    }
    Ok(())
}
