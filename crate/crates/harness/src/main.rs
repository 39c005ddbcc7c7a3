use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use omninav::planning::PlannerKind;
use omninav::Point2D;
use omninav_harness::calibration::{calibrate, emit_reference, read_reference, write_reference};
use omninav_harness::config::{load_map_file, ExperimentConfig};
use omninav_harness::demo::{demo_map, plan_demo, DEMO_GOAL, DEMO_START};
use omninav_harness::experiment::run_experiment_with;
use omninav_harness::output::{write_experiment, RunRow};
use omninav_harness::summary::{compare, load_runs, render, summarize};

#[derive(Parser)]
#[command(name = "omninav", version, about = "Waypoint navigation experiments for a three-omniwheel robot")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment and write timings, trajectories, events and plots.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the config output directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        quiet: bool,
    },
    /// Estimate the drive scale factor from a travel-time table.
    Calibrate {
        #[arg(long)]
        config: PathBuf,
        /// CSV with columns distance,speed,time.
        #[arg(long, required_unless_present = "emit_reference")]
        reference: Option<PathBuf>,
        /// Write the simulator's own table at the configured scale factor instead.
        #[arg(long)]
        emit_reference: Option<PathBuf>,
    },
    /// Compare the global planners on one start/goal pair and write an SVG.
    PlanDemo {
        /// Map file; defaults to the bundled slalom.
        #[arg(long)]
        map: Option<PathBuf>,
        /// navfn, astar or thetastar; repeatable, all three by default.
        #[arg(long)]
        planner: Vec<String>,
        /// Start as x,y.
        #[arg(long, value_parser = parse_point)]
        start: Option<Point2D>,
        /// Goal as x,y.
        #[arg(long, value_parser = parse_point)]
        goal: Option<Point2D>,
        #[arg(long, default_value = "plan_demo.svg")]
        out: PathBuf,
    },
    /// Timing table of a finished run, optionally with ratios against a baseline run.
    Summarize {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        baseline: Option<PathBuf>,
    },
}

fn parse_point(s: &str) -> Result<Point2D, String> {
    let (x, y) = s.split_once(',').ok_or("expected x,y")?;
    let x: f64 = x.trim().parse().map_err(|e| format!("{e}"))?;
    let y: f64 = y.trim().parse().map_err(|e| format!("{e}"))?;
    Ok(Point2D::new(x, y))
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Run { config, seed, out, quiet } => {
            let mut cfg = ExperimentConfig::load(&config)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            let out = out.unwrap_or_else(|| cfg.output_dir());
            let started = Instant::now();
            let result = run_experiment_with(&cfg, |run| {
                if !quiet {
                    let times: Vec<String> = run.records.iter().map(|r| format!("R{} {:.2}s", r.robot + 1, r.total_time())).collect();
                    let failed: usize = run.records.iter().map(|r| r.failed_legs()).sum();
                    eprintln!("path {} rep {}: {} failed legs {failed}", run.path, run.rep, times.join(", "));
                }
            })?;
            write_experiment(&out, &result, cfg.plots)?;
            let rows: Vec<_> = result.records().map(RunRow::from_record).collect();
            print!("{}", render(&summarize(&rows)?, None));
            if !quiet {
                eprintln!("wrote {} in {:.1}s", out.display(), started.elapsed().as_secs_f64());
            }
        }
        Command::Calibrate { config, reference, emit_reference: emit } => {
            let cfg = ExperimentConfig::load(&config)?;
            if let Some(path) = emit {
                let rows = emit_reference(&cfg)?;
                write_reference(&path, &rows)?;
                println!("wrote {} rows to {}", rows.len(), path.display());
                return Ok(());
            }
            let path = reference.context("--reference is required")?;
            let rows = read_reference(&path)?;
            let result = calibrate(&cfg, &rows)?;
            println!("{:>9} {:>7} {:>10} {:>12} {:>10}", "distance", "speed", "reference", "unit_scale", "check");
            for t in &result.trials {
                println!(
                    "{:>9.3} {:>7.3} {:>10.4} {:>12.6} {:>10.4}",
                    t.reference.distance, t.reference.speed, t.reference.time, t.unit_time, t.check_time
                );
            }
            println!("max relative time error {:.4}", result.max_relative_error());
            println!("scale_factor {}", result.scale_factor);
        }
        Command::PlanDemo { map, planner, start, goal, out } => {
            let world = match &map {
                Some(p) => load_map_file(p)?,
                None => demo_map(),
            };
            let kinds = if planner.is_empty() {
                PlannerKind::ALL.to_vec()
            } else {
                planner
                    .iter()
                    .map(|s| PlannerKind::parse(s).with_context(|| format!("unknown planner {s}; use navfn, astar or thetastar")))
                    .collect::<Result<Vec<_>>>()?
            };
            let (start, goal) = match (start, goal, &map) {
                (Some(s), Some(g), _) => (s, g),
                (None, None, None) => (Point2D::new(DEMO_START.0, DEMO_START.1), Point2D::new(DEMO_GOAL.0, DEMO_GOAL.1)),
                _ => bail!("give both --start and --goal (required with --map)"),
            };
            let result = plan_demo(&world, &kinds, start, goal, Default::default())?;
            for p in &result.paths {
                println!("{:<11} length {:.3} m  segments {}", p.planner.as_str(), p.length, p.segment_count());
            }
            std::fs::write(&out, &result.svg).with_context(|| format!("writing {}", out.display()))?;
            println!("wrote {}", out.display());
        }
        Command::Summarize { input, baseline } => {
            let current = summarize(&load_runs(&input)?)?;
            let comparison = match baseline {
                Some(b) => Some(compare(&current, &summarize(&load_runs(&b)?)?)),
                None => None,
            };
            print!("{}", render(&current, comparison.as_ref()));
        }
    }
    Ok(())
}
