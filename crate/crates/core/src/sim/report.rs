//! Run outputs: `log.csv`, `plans.csv`, `metrics.json` and SVG plots.

use std::fs;
use std::path::{Path, PathBuf};

use plotters::prelude::*;
use serde::Serialize;

use super::log::{write_plans_csv, write_steps_csv, Outcome, StepRecord};
use super::metrics::Metrics;
use super::runner::SimResult;
use super::SimError;

/// Samples kept per plotted series.
const PLOT_POINTS: usize = 4000;

type Line<'a> = (&'a str, Vec<(f64, f64)>, RGBColor);

#[derive(Serialize)]
struct Summary<'a> {
    outcome: Outcome,
    note: Option<&'a str>,
    #[serde(flatten)]
    metrics: &'a Metrics,
}

/// Writes every output of a run into `dir`, creating it if needed. Returns
/// the files written.
pub fn emit_report(dir: &Path, result: &SimResult) -> Result<Vec<PathBuf>, SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let log = dir.join("log.csv");
    write_steps_csv(&log, &result.log.steps)?;
    let plans = dir.join("plans.csv");
    write_plans_csv(&plans, &result.log.plans)?;
    let metrics = dir.join("metrics.json");
    let summary = Summary { outcome: result.log.outcome, note: result.log.note.as_deref(), metrics: &result.metrics };
    let json = serde_json::to_string_pretty(&summary).expect("metrics serialize");
    fs::write(&metrics, json + "\n").map_err(|e| SimError::io(&metrics, e))?;
    let mut files = vec![log, plans, metrics];
    files.extend(write_plots(dir, &result.log.steps)?);
    Ok(files)
}

/// Trajectory overlay, speeds, steering split and front-left torque.
pub fn write_plots(dir: &Path, steps: &[StepRecord]) -> Result<Vec<PathBuf>, SimError> {
    fs::create_dir_all(dir).map_err(|e| SimError::io(dir, e))?;
    let stride = (steps.len() / PLOT_POINTS).max(1);
    let rows: Vec<&StepRecord> = steps.iter().step_by(stride).collect();
    let series = |f: fn(&StepRecord) -> f64| rows.iter().map(|r| (r.t, f(r))).collect::<Vec<_>>();

    let mut files = Vec::new();
    let planned: Vec<_> = rows.iter().filter(|r| r.t > 0.0).map(|r| (r.ref_x, r.ref_y)).collect();
    let driven: Vec<_> = rows.iter().map(|r| (r.x, r.y)).collect();
    files.push(xy_plot(dir, "trajectory.svg", "Trajectory", ("x (m)", "y (m)"), &[
        ("planned", planned, BLUE),
        ("vehicle", driven, RED),
    ])?);
    files.push(xy_plot(dir, "speed.svg", "Speed", ("t (s)", "m/s"), &[
        ("V_heur", series(|r| r.v_heur), GREEN),
        ("V_ref", series(|r| r.ref_v), BLUE),
        ("V", series(|r| r.vx), RED),
    ])?);
    files.push(xy_plot(dir, "steering.svg", "Steering", ("t (s)", "rad"), &[
        ("delta", series(|r| r.steer), BLUE),
        ("delta_cl", series(|r| r.steer_cl), RED),
    ])?);
    files.push(xy_plot(dir, "torque.svg", "Front-left wheel torque", ("t (s)", "N m"), &[(
        "T_fl",
        series(|r| r.torque_fl),
        BLUE,
    )])?);
    Ok(files)
}

fn bounds(lines: &[Line<'_>]) -> (std::ops::Range<f64>, std::ops::Range<f64>) {
    let mut x = (f64::INFINITY, f64::NEG_INFINITY);
    let mut y = (f64::INFINITY, f64::NEG_INFINITY);
    for (_, pts, _) in lines {
        for &(a, b) in pts.iter().filter(|(a, b)| a.is_finite() && b.is_finite()) {
            x = (x.0.min(a), x.1.max(a));
            y = (y.0.min(b), y.1.max(b));
        }
    }
    let pad = |(lo, hi): (f64, f64)| {
        if !lo.is_finite() {
            return -1.0..1.0;
        }
        let m = ((hi - lo) * 0.05).max(1e-3);
        (lo - m)..(hi + m)
    };
    (pad(x), pad(y))
}

fn xy_plot(
    dir: &Path,
    name: &str,
    title: &str,
    labels: (&str, &str),
    lines: &[Line<'_>],
) -> Result<PathBuf, SimError> {
    let path = dir.join(name);
    draw(&path, title, labels, lines)
        .map_err(|message| SimError::Plot { path: path.display().to_string(), message })?;
    Ok(path)
}

fn draw(
    path: &Path,
    title: &str,
    labels: (&str, &str),
    lines: &[Line<'_>],
) -> Result<(), String> {
    let err = |e: &dyn std::fmt::Display| e.to_string();
    let (xr, yr) = bounds(lines);
    let root = SVGBackend::new(path, (1000, 640)).into_drawing_area();
    root.fill(&WHITE).map_err(|e| err(&e))?;
    let mut chart = ChartBuilder::on(&root)
        .caption(title, ("sans-serif", 22))
        .margin(12)
        .x_label_area_size(40)
        .y_label_area_size(60)
        .build_cartesian_2d(xr, yr)
        .map_err(|e| err(&e))?;
    chart
        .configure_mesh()
        .x_desc(labels.0)
        .y_desc(labels.1)
        .draw()
        .map_err(|e| err(&e))?;
    for (label, pts, color) in lines {
        let color = *color;
        chart
            .draw_series(LineSeries::new(pts.iter().copied().filter(|(a, b)| a.is_finite() && b.is_finite()), color))
            .map_err(|e| err(&e))?
            .label(*label)
            .legend(move |(x, y)| PathElement::new(vec![(x, y), (x + 18, y)], color));
    }
    chart
        .configure_series_labels()
        .background_style(WHITE.mix(0.8))
        .border_style(BLACK)
        .draw()
        .map_err(|e| err(&e))?;
    root.present().map_err(|e| err(&e))
}
