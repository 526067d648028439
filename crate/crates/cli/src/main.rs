use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use idc_core::harness::{
    run_ablation, run_closed_loop, write_linear_model, write_log, Scenario, Sweep,
};
use idc_core::LinearModel;
use nalgebra::Vector3;

/// Closed-loop simulation of cooperative payload transport with MPC tracking
/// and a barrier-function safety filter.
#[derive(Parser)]
#[command(name = "idc", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scenario and write its logs.
    Simulate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Overrides the noise seed of the scenario.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the scenario once per value of a swept parameter.
    Ablate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_parser = ["noise", "mass", "margin"])]
        sweep: String,
        /// Comma-separated values, e.g. `0,0.004,0.008`.
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        values: Vec<f64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
    },
    /// Export the discrete-time model used by the controller as CSV.
    Linearize {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
}

/// `println!` that tolerates a closed stdout, e.g. when piped into `head`.
macro_rules! say {
    ($($arg:tt)*) => {{
        use std::io::Write;
        let _ = writeln!(std::io::stdout(), $($arg)*);
    }};
}

/// Exit status for a run that finished early.
const RUN_FAILED: u8 = 2;

fn load(path: &Path) -> Result<Scenario> {
    Scenario::load(path).with_context(|| format!("loading {}", path.display()))
}

fn simulate(path: &Path, out: &Path, seed: Option<u64>) -> Result<bool> {
    let mut scenario = load(path)?;
    if let Some(seed) = seed {
        scenario.noise.seed = seed;
    }
    let log = run_closed_loop(&scenario)?;
    write_log(&log, out).with_context(|| format!("writing logs to {}", out.display()))?;
    let m = &log.metrics;
    say!("status: {}", log.status);
    say!("steps: {}", m.steps);
    say!("rms position error: {:.4} m", m.rms_position_error);
    say!(
        "max |roll| {:.3} deg, |pitch| {:.3} deg, |yaw| {:.3} deg",
        m.max_abs_roll, m.max_abs_pitch, m.max_abs_yaw
    );
    for (i, h) in m.min_h.iter().enumerate() {
        say!("min h[{i}]: {h:.4} m^2");
    }
    say!("solve time mean {:.2} ms, p99 {:.2} ms", m.mean_solve_ms, m.p99_solve_ms);
    say!("logs written to {}", out.display());
    Ok(log.status.is_completed())
}

fn ablate(path: &Path, sweep: &str, values: &[f64], out: &Path) -> Result<bool> {
    if values.is_empty() {
        bail!("--values needs at least one number");
    }
    let scenario = load(path)?;
    let sweep: Sweep = sweep.parse()?;
    let rows = run_ablation(&scenario, sweep, values)?;
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let table = out.join(format!("ablation_{}.csv", sweep.name()));
    let mut w = csv::Writer::from_path(&table)?;
    let n_obs = scenario.obstacles.len();
    let mut header: Vec<String> = [
        "value",
        "status",
        "rms_position_error",
        "max_abs_roll",
        "max_abs_pitch",
        "max_abs_yaw",
        "control_effort",
        "mean_solve_ms",
        "p99_solve_ms",
    ]
    .map(String::from)
    .to_vec();
    header.extend((0..n_obs).map(|i| format!("min_h_{i}")));
    w.write_record(&header)?;
    let mut all_ok = true;
    for r in &rows {
        let m = &r.metrics;
        all_ok &= r.status.is_completed();
        let mut rec = vec![
            r.value.to_string(),
            r.status.label().to_string(),
            m.rms_position_error.to_string(),
            m.max_abs_roll.to_string(),
            m.max_abs_pitch.to_string(),
            m.max_abs_yaw.to_string(),
            m.control_effort.to_string(),
            m.mean_solve_ms.to_string(),
            m.p99_solve_ms.to_string(),
        ];
        rec.extend(m.min_h.iter().map(|h| h.to_string()));
        w.write_record(&rec)?;
        say!(
            "{} = {}: {}, rms {:.4} m, max tilt {:.3} deg, effort {:.2}",
            sweep.name(),
            r.value,
            r.status.label(),
            m.rms_position_error,
            m.max_abs_tilt(),
            m.control_effort
        );
    }
    w.flush()?;
    say!("table written to {}", table.display());
    Ok(all_ok)
}

fn linearize(path: &Path, out: &Path) -> Result<()> {
    let scenario = load(path)?;
    let params = scenario.controller_params()?;
    let model = LinearModel::about_hover(&params, Vector3::from(scenario.initial_position), scenario.control_dt)?;
    write_linear_model(&model, out)?;
    say!(
        "A {}x{}, B {}x{}, C {}x{} written to {}",
        model.a.nrows(),
        model.a.ncols(),
        model.b.nrows(),
        model.b.ncols(),
        model.c.nrows(),
        model.c.ncols(),
        out.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match &cli.command {
        Command::Simulate { scenario, out, seed } => simulate(scenario, out, *seed),
        Command::Ablate {
            scenario,
            sweep,
            values,
            out,
        } => ablate(scenario, sweep, values, out),
        Command::Linearize { scenario, out } => linearize(scenario, out).map(|_| true),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(RUN_FAILED),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
