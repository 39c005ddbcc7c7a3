//! Timing tables over run records, and ratios between two experiments.

use std::collections::BTreeMap;
use std::fmt::Write;
use std::path::Path;

use crate::output::{read_csv, RunRow, TimingRow, RUNS_FILE, TIMINGS_FILE};
use crate::HarnessError;

#[derive(Debug, Clone, PartialEq)]
pub struct PathSummary {
    pub path: usize,
    pub runs: usize,
    pub mean: f64,
    pub min: f64,
    pub max: f64,
    pub total: f64,
    pub failed_legs: usize,
    pub recoveries: usize,
    pub collisions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotSummary {
    pub robot: usize,
    pub runs: usize,
    pub total: f64,
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub experiment: String,
    pub paths: Vec<PathSummary>,
    pub robots: Vec<RobotSummary>,
    pub runs: usize,
    pub total: f64,
    /// Mean total time of one robot's run.
    pub mean_run_time: f64,
    pub failed_legs: usize,
    pub recoveries: usize,
    pub collisions: usize,
    pub machine_collisions: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub baseline: String,
    /// Per robot: its mean run time over the baseline's mean run time.
    pub robot_ratios: Vec<(usize, f64)>,
    pub overall_ratio: f64,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

pub fn summarize(rows: &[RunRow]) -> Result<Summary, HarnessError> {
    if rows.is_empty() {
        return Err(HarnessError::Config("no run records to summarize".into()));
    }
    let mut by_path: BTreeMap<usize, Vec<&RunRow>> = BTreeMap::new();
    let mut by_robot: BTreeMap<usize, Vec<f64>> = BTreeMap::new();
    for r in rows {
        by_path.entry(r.path).or_default().push(r);
        by_robot.entry(r.robot).or_default().push(r.total_time);
    }
    let paths = by_path
        .into_iter()
        .map(|(path, rs)| {
            let times: Vec<f64> = rs.iter().map(|r| r.total_time).collect();
            PathSummary {
                path,
                runs: rs.len(),
                mean: mean(&times),
                min: times.iter().cloned().fold(f64::INFINITY, f64::min),
                max: times.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
                total: times.iter().sum(),
                failed_legs: rs.iter().map(|r| r.legs - r.legs_reached).sum(),
                recoveries: rs.iter().map(|r| r.recoveries).sum(),
                collisions: rs.iter().map(|r| r.collisions).sum(),
            }
        })
        .collect();
    let robots = by_robot
        .into_iter()
        .map(|(robot, times)| RobotSummary { robot, runs: times.len(), total: times.iter().sum(), mean: mean(&times) })
        .collect();
    let all: Vec<f64> = rows.iter().map(|r| r.total_time).collect();
    Ok(Summary {
        experiment: rows[0].experiment.clone(),
        paths,
        robots,
        runs: rows.len(),
        total: all.iter().sum(),
        mean_run_time: mean(&all),
        failed_legs: rows.iter().map(|r| r.legs - r.legs_reached).sum(),
        recoveries: rows.iter().map(|r| r.recoveries).sum(),
        collisions: rows.iter().map(|r| r.collisions).sum(),
        machine_collisions: rows.iter().map(|r| r.machine_collisions).sum(),
    })
}

pub fn compare(current: &Summary, baseline: &Summary) -> Comparison {
    Comparison {
        baseline: baseline.experiment.clone(),
        robot_ratios: current.robots.iter().map(|r| (r.robot, r.mean / baseline.mean_run_time)).collect(),
        overall_ratio: current.mean_run_time / baseline.mean_run_time,
    }
}

/// Reads `runs.csv` and checks each run total against the legs in `timings.csv`.
pub fn load_runs(dir: &Path) -> Result<Vec<RunRow>, HarnessError> {
    let runs: Vec<RunRow> = read_csv(&dir.join(RUNS_FILE))?;
    let timings: Vec<TimingRow> = read_csv(&dir.join(TIMINGS_FILE))?;
    let mut sums: BTreeMap<(usize, usize, usize), f64> = BTreeMap::new();
    for t in &timings {
        *sums.entry((t.path, t.rep, t.robot)).or_default() += t.duration;
    }
    for r in &runs {
        let legs = sums.get(&(r.path, r.rep, r.robot)).copied().unwrap_or(0.0);
        if (legs - r.total_time).abs() > 1e-6 {
            return Err(HarnessError::Config(format!(
                "path {} rep {} robot {}: total {} differs from leg sum {legs}",
                r.path, r.rep, r.robot, r.total_time
            )));
        }
    }
    Ok(runs)
}

pub fn render(summary: &Summary, comparison: Option<&Comparison>) -> String {
    let mut s = String::new();
    let _ = writeln!(s, "experiment {} ({} robot runs)", summary.experiment, summary.runs);
    let _ = writeln!(s, "{:>5} {:>5} {:>9} {:>9} {:>9} {:>10} {:>7} {:>10} {:>10}", "path", "runs", "mean_s", "min_s", "max_s", "total_s", "failed", "recoveries", "collisions");
    for p in &summary.paths {
        let _ = writeln!(
            s,
            "{:>5} {:>5} {:>9.2} {:>9.2} {:>9.2} {:>10.2} {:>7} {:>10} {:>10}",
            p.path, p.runs, p.mean, p.min, p.max, p.total, p.failed_legs, p.recoveries, p.collisions
        );
    }
    let _ = writeln!(
        s,
        "total {:.2} s, mean run {:.2} s, failed legs {}, recoveries {}, collisions {} (machine/wall {})",
        summary.total, summary.mean_run_time, summary.failed_legs, summary.recoveries, summary.collisions, summary.machine_collisions
    );
    for r in &summary.robots {
        let _ = writeln!(s, "robot R{}: {} runs, total {:.2} s, mean {:.2} s", r.robot + 1, r.runs, r.total, r.mean);
    }
    if let Some(c) = comparison {
        for (robot, ratio) in &c.robot_ratios {
            let _ = writeln!(s, "ratio R{} / {}: {:.4}", robot + 1, c.baseline, ratio);
        }
        let _ = writeln!(s, "ratio {} / {}: {:.4}", summary.experiment, c.baseline, c.overall_ratio);
    }
    s
}
