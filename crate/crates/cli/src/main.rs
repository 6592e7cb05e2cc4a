use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use fmpc_core::sim::{compute_metrics, emit_report, read_steps_csv, run_scenario, write_plots, Outcome, Scenario, ScenarioConfig};
use fmpc_core::track::{write_track_csv, TrackSpec};

#[derive(Parser)]
#[command(name = "fmpc", version, about = "Trajectory planning and control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario and write log, plans, metrics and plots.
    Run {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Override the scenario duration (s).
        #[arg(long)]
        duration: Option<f64>,
        /// Ignore the scenario's obstacle file.
        #[arg(long)]
        no_obstacles: bool,
    },
    /// Recompute the run summary from a step log.
    Metrics {
        #[arg(long)]
        log: PathBuf,
    },
    /// Redraw the plots from a step log.
    Plot {
        #[arg(long)]
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Track utilities.
    Track {
        #[command(subcommand)]
        command: TrackCommand,
    },
}

#[derive(Subcommand)]
enum TrackCommand {
    /// Generate a waypoint CSV from a segment spec.
    Gen {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

fn run(scenario: PathBuf, out: PathBuf, duration: Option<f64>, no_obstacles: bool) -> Result<ExitCode> {
    let mut cfg = ScenarioConfig::load(&scenario)?;
    if let Some(d) = duration {
        cfg.duration = d;
    }
    if no_obstacles {
        cfg.obstacles = None;
    }
    cfg.validate_params()?;
    let sc = Scenario::load(cfg)?;
    let result = run_scenario(&sc)?;
    let files = emit_report(&out, &result)?;
    let m = &result.metrics;
    println!("outcome: {:?}", result.log.outcome);
    if let Some(note) = &result.log.note {
        println!("note: {note}");
    }
    println!("distance: {:.1} m in {:.2} s", m.distance, m.duration);
    println!("max lateral error: {:.3} m", m.max_lateral_error);
    println!("max tracking error: {:.3} m", m.max_tracking_error);
    println!("max lateral acceleration: {:.3} m/s^2", m.max_lateral_accel);
    println!("planner: {} cycles, {} failed, max {:.2} ms", m.planner_cycles, m.failed_cycles, m.max_mpc_wall_ms);
    if let Some(c) = m.min_obstacle_clearance {
        println!("min obstacle clearance: {c:.3} m");
    }
    for f in files {
        println!("wrote {}", f.display());
    }
    Ok(if result.log.outcome == Outcome::Aborted { ExitCode::from(2) } else { ExitCode::SUCCESS })
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run { scenario, out, duration, no_obstacles } => run(scenario, out, duration, no_obstacles),
        Command::Metrics { log } => read_steps_csv(&log)
            .map_err(Into::into)
            .and_then(|steps| {
                let json = serde_json::to_string_pretty(&compute_metrics(&steps))?;
                match writeln!(std::io::stdout(), "{json}") {
                    Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
                    _ => Ok(ExitCode::SUCCESS),
                }
            }),
        Command::Plot { log, out } => read_steps_csv(&log).and_then(|steps| write_plots(&out, &steps)).map(|files| {
            for f in files {
                println!("wrote {}", f.display());
            }
            ExitCode::SUCCESS
        }).map_err(Into::into),
        Command::Track { command: TrackCommand::Gen { spec, out } } => TrackSpec::load(&spec)
            .and_then(|s| s.generate())
            .and_then(|pts| write_track_csv(&out, &pts).map(|_| pts.len()))
            .with_context(|| format!("generating {}", out.display()))
            .map(|n| {
                println!("wrote {n} points to {}", out.display());
                ExitCode::SUCCESS
            }),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
