//! Output files of a run.
//!
//! `write_log` produces, inside the target directory:
//!
//! * `trajectory.csv`: one row per control step. Columns are `t`, the state
//!   in state-vector order, the applied inputs `u.*`, the true barrier values
//!   `h_<i>`, `solve_ms`, then the tracking inputs `ubar.*`, the reference
//!   position, `h_dot_<i>`, `active_<i>` and solver diagnostics. Values are
//!   written with 17 significant digits.
//! * `metrics.txt`: `key=value` lines.
//! * `tracking.dat`, `attitude.dat`, `barrier.dat`: whitespace-separated
//!   columns with a `#` header, ready for gnuplot or similar.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::Path;

use nalgebra::DMatrix;

use super::run::{Metrics, TrajectoryLog};
use super::HarnessError;
use crate::linearize::{input_names, state_names};
use crate::LinearModel;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> HarnessError + '_ {
    move |source| HarnessError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn num(v: f64) -> String {
    format!("{v:.16e}")
}

fn flag(b: bool) -> String {
    u8::from(b).to_string()
}

pub fn trajectory_header(log: &TrajectoryLog) -> Vec<String> {
    let mut h = vec!["t".to_string()];
    h.extend(log.state_names.iter().cloned());
    h.extend(log.input_names.iter().map(|n| format!("u.{n}")));
    h.extend((0..log.n_obstacles).map(|i| format!("h_{i}")));
    h.push("solve_ms".into());
    h.extend(log.input_names.iter().map(|n| format!("ubar.{n}")));
    h.extend(["ref.x", "ref.y", "ref.z"].map(String::from));
    h.extend((0..log.n_obstacles).map(|i| format!("h_dot_{i}")));
    h.extend((0..log.n_obstacles).map(|i| format!("active_{i}")));
    h.extend(
        ["mpc_iterations", "filter_iterations", "passive", "softened", "barrier_margin"].map(String::from),
    );
    h
}

fn create_dir(dir: &Path) -> Result<(), HarnessError> {
    fs::create_dir_all(dir).map_err(io_err(dir))
}

/// Writes the trajectory, metrics and plot-data files into `dir`, creating
/// it if needed.
pub fn write_log(log: &TrajectoryLog, dir: &Path) -> Result<(), HarnessError> {
    create_dir(dir)?;
    let path = dir.join("trajectory.csv");
    let mut w = csv::Writer::from_path(&path)?;
    w.write_record(trajectory_header(log))?;
    for r in &log.rows {
        let mut rec = vec![num(r.t)];
        rec.extend(r.state.iter().map(|v| num(*v)));
        rec.extend(r.u.iter().map(|v| num(*v)));
        rec.extend(r.h.iter().map(|v| num(*v)));
        rec.push(num(r.solve_ms));
        rec.extend(r.u_bar.iter().map(|v| num(*v)));
        rec.extend(r.reference.iter().map(|v| num(*v)));
        rec.extend(r.h_dot.iter().map(|v| num(*v)));
        rec.extend(r.active.iter().map(|a| flag(*a)));
        rec.push(r.mpc_iterations.to_string());
        rec.push(r.filter_iterations.to_string());
        rec.push(flag(r.passive));
        rec.push(flag(r.softened));
        rec.push(num(r.barrier_margin));
        w.write_record(&rec)?;
    }
    w.flush().map_err(io_err(&path))?;

    write_metrics(log, &dir.join("metrics.txt"))?;
    write_plot_data(log, dir)
}

pub fn write_metrics(log: &TrajectoryLog, path: &Path) -> Result<(), HarnessError> {
    let mut f = BufWriter::new(File::create(path).map_err(io_err(path))?);
    let text = metrics_text(&log.name, &log.status.to_string(), log.status.label(), &log.metrics);
    f.write_all(text.as_bytes()).and_then(|_| f.flush()).map_err(io_err(path))
}

pub(crate) fn metrics_text(name: &str, detail: &str, status: &str, m: &Metrics) -> String {
    let mut lines = vec![
        format!("scenario={name}"),
        format!("status={status}"),
        format!("status_detail={detail}"),
        format!("steps={}", m.steps),
        format!("rms_position_error={}", m.rms_position_error),
        format!("max_abs_roll={}", m.max_abs_roll),
        format!("max_abs_pitch={}", m.max_abs_pitch),
        format!("max_abs_yaw={}", m.max_abs_yaw),
    ];
    lines.extend(m.min_h.iter().enumerate().map(|(i, h)| format!("min_h_{i}={h}")));
    lines.extend([
        format!("control_effort={}", m.control_effort),
        format!("mean_solve_ms={}", m.mean_solve_ms),
        format!("p99_solve_ms={}", m.p99_solve_ms),
        format!("max_solve_ms={}", m.max_solve_ms),
        format!("max_filter_deviation={}", m.max_filter_deviation),
        format!("softened_steps={}", m.softened_steps),
        format!("unstable={}", m.unstable),
        format!("infeasible={}", m.infeasible),
    ]);
    lines.join("\n") + "\n"
}

fn write_plot_data(log: &TrajectoryLog, dir: &Path) -> Result<(), HarnessError> {
    let write = |name: &str, header: String, rows: Vec<String>| -> Result<(), HarnessError> {
        let path = dir.join(name);
        let mut f = BufWriter::new(File::create(&path).map_err(io_err(&path))?);
        let mut body = format!("# {header}\n");
        for r in rows {
            body.push_str(&r);
            body.push('\n');
        }
        f.write_all(body.as_bytes()).and_then(|_| f.flush()).map_err(io_err(&path))
    };
    let join = |vals: Vec<f64>| vals.iter().map(|v| format!("{v:.9e}")).collect::<Vec<_>>().join(" ");

    write(
        "tracking.dat",
        "t x y z x_ref y_ref z_ref".into(),
        log.rows
            .iter()
            .map(|r| join(vec![r.t, r.state[0], r.state[1], r.state[2], r.reference.x, r.reference.y, r.reference.z]))
            .collect(),
    )?;
    write(
        "attitude.dat",
        "t roll_deg pitch_deg yaw_deg".into(),
        log.rows
            .iter()
            .map(|r| join(vec![r.t, r.state[6].to_degrees(), r.state[7].to_degrees(), r.state[8].to_degrees()]))
            .collect(),
    )?;
    let header = std::iter::once("t".to_string())
        .chain((0..log.n_obstacles).map(|i| format!("h_{i}")))
        .collect::<Vec<_>>()
        .join(" ");
    write(
        "barrier.dat",
        header,
        log.rows
            .iter()
            .map(|r| join(std::iter::once(r.t).chain(r.h.iter().copied()).collect()))
            .collect(),
    )
}

/// Header and numeric rows of a trajectory CSV.
pub fn read_trajectory_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), HarnessError> {
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.iter().map(String::from).collect();
    let mut rows = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        let vals = rec
            .iter()
            .map(|f| f.parse::<f64>().map_err(|e| HarnessError::Scenario(format!("{}: bad number '{f}': {e}", path.display()))))
            .collect::<Result<Vec<_>, _>>()?;
        rows.push(vals);
    }
    Ok((header, rows))
}

fn write_matrix(path: &Path, m: &DMatrix<f64>, rows: &[String], cols: &[String]) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(std::iter::once("").chain(cols.iter().map(String::as_str)))?;
    for (i, name) in rows.iter().enumerate() {
        w.write_record(std::iter::once(name.clone()).chain(m.row(i).iter().map(|v| num(*v))))?;
    }
    w.flush().map_err(io_err(path))
}

/// `A.csv`, `B.csv` and `C.csv` of the discrete model, labelled with state,
/// input and output names.
pub fn write_linear_model(model: &LinearModel, dir: &Path) -> Result<(), HarnessError> {
    create_dir(dir)?;
    let states = state_names(model.n_uavs);
    let inputs = input_names(model.n_uavs);
    write_matrix(&dir.join("A.csv"), &model.a, &states, &states)?;
    write_matrix(&dir.join("B.csv"), &model.b, &states, &inputs)?;
    write_matrix(&dir.join("C.csv"), &model.c, &model.output_names, &states)
}
