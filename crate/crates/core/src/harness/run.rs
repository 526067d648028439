use std::time::Instant;

use nalgebra::{DVector, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use super::reference::{reference_output, reference_position};
use super::scenario::Scenario;
use super::HarnessError;
use crate::dynamics::{equilibrium, euler_to_rotation, step_rk4};
use crate::ecbf::{barrier_derivatives, build_constraints, closest_contact, BarrierConstraintSet, EcbfError, SafetyFilter};
use crate::hull::{build_hull, obstacle_state, HullGeometry, Obstacle};
use crate::linearize::{input_names, state_names};
use crate::mpc::{MpcController, MpcError};
use crate::qp::QpError;
use crate::{ControlInput, LinearModel, SystemParams, SystemState};

/// Payload attitude beyond which a run is declared unstable (deg).
pub const INSTABILITY_ATTITUDE_DEG: f64 = 30.0;

#[derive(Debug, Clone, PartialEq)]
pub enum RunStatus {
    Completed,
    /// The tracking or filter QP failed at time `t`.
    Infeasible { t: f64, reason: String },
    /// The plant diverged at time `t`.
    Unstable { t: f64, reason: String },
}

impl RunStatus {
    pub fn is_completed(&self) -> bool {
        matches!(self, RunStatus::Completed)
    }

    pub fn label(&self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Infeasible { .. } => "infeasible",
            RunStatus::Unstable { .. } => "unstable",
        }
    }
}

impl std::fmt::Display for RunStatus {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            RunStatus::Completed => write!(f, "completed"),
            RunStatus::Infeasible { t, reason } => write!(f, "infeasible at t = {t:.3} s: {reason}"),
            RunStatus::Unstable { t, reason } => write!(f, "unstable at t = {t:.3} s: {reason}"),
        }
    }
}

/// One control instant.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    /// True plant state at `t`.
    pub state: DVector<f64>,
    pub reference: Vector3<f64>,
    /// Tracking input `u_e + Δū`.
    pub u_bar: DVector<f64>,
    /// Applied input `u_e + Δu*`.
    pub u: DVector<f64>,
    /// True barrier values per obstacle.
    pub h: Vec<f64>,
    pub h_dot: Vec<f64>,
    /// Barrier row of the obstacle was active in the filter QP.
    pub active: Vec<bool>,
    pub mpc_iterations: usize,
    pub filter_iterations: usize,
    pub passive: bool,
    pub softened: bool,
    /// Smallest `B_obs − A_obs Δu*` over the rows in sensing range, i.e. the
    /// predicted `ḧ + k₂ḣ + k₁h`; infinite without rows.
    pub barrier_margin: f64,
    /// Wall time of tracking solve, hull, barrier rows and filter (ms).
    pub solve_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Metrics {
    /// RMS payload position error after the settle time (m).
    pub rms_position_error: f64,
    /// Payload attitude extremes at plant resolution (deg).
    pub max_abs_roll: f64,
    pub max_abs_pitch: f64,
    pub max_abs_yaw: f64,
    /// Smallest true barrier value per obstacle at plant resolution (m²).
    pub min_h: Vec<f64>,
    /// `∫‖u‖₂ dt`.
    pub control_effort: f64,
    pub mean_solve_ms: f64,
    pub max_solve_ms: f64,
    pub p99_solve_ms: f64,
    /// Largest `‖Δu* − Δū‖∞` over the run.
    pub max_filter_deviation: f64,
    pub softened_steps: usize,
    pub steps: usize,
    pub unstable: bool,
    pub infeasible: bool,
}

impl Metrics {
    pub fn max_abs_tilt(&self) -> f64 {
        self.max_abs_roll.max(self.max_abs_pitch)
    }

    pub fn max_abs_attitude(&self) -> f64 {
        self.max_abs_tilt().max(self.max_abs_yaw)
    }
}

#[derive(Debug, Clone)]
pub struct TrajectoryLog {
    pub name: String,
    pub state_names: Vec<String>,
    pub input_names: Vec<String>,
    pub n_obstacles: usize,
    pub rows: Vec<StepRecord>,
    pub metrics: Metrics,
    pub status: RunStatus,
}

struct Barriers {
    h: Vec<f64>,
    h_dot: Vec<f64>,
}

/// Barrier values of the true system, using its own hull.
fn true_barriers(
    params: &SystemParams,
    state: &SystemState,
    geometry: &HullGeometry,
    obstacles: &[Obstacle],
    t: f64,
) -> Result<Barriers, HarnessError> {
    let mut out = Barriers {
        h: Vec::with_capacity(obstacles.len()),
        h_dot: Vec::with_capacity(obstacles.len()),
    };
    if obstacles.is_empty() {
        return Ok(out);
    }
    let hull = build_hull(params, state, geometry)?;
    let c_dot = euler_to_rotation(&state.theta0) * state.v0;
    for obs in obstacles {
        let os = obstacle_state(obs, t);
        let (c, normal_space) = closest_contact(&hull, &os.position, obs.is_planar(), state.r0.z)?;
        let d = barrier_derivatives(
            &c,
            &c_dot,
            &normal_space,
            &os.position,
            &os.velocity,
            &os.acceleration,
            obs.effective_radius(),
            obs.is_planar(),
        );
        out.h.push(d.h);
        out.h_dot.push(d.h_dot);
    }
    Ok(out)
}

struct Tracker {
    max_att: Vector3<f64>,
    min_h: Vec<f64>,
}

impl Tracker {
    fn observe(&mut self, state: &SystemState, barriers: &Barriers) {
        for a in 0..3 {
            self.max_att[a] = self.max_att[a].max(state.theta0[a].abs());
        }
        for (m, h) in self.min_h.iter_mut().zip(&barriers.h) {
            *m = m.min(*h);
        }
    }
}

fn instability(state: &SystemState) -> Option<String> {
    if !state.is_finite() {
        return Some("non-finite state".into());
    }
    let limit = INSTABILITY_ATTITUDE_DEG.to_radians();
    if state.theta0.amax() > limit {
        return Some(format!(
            "payload attitude {:.1} deg exceeds {INSTABILITY_ATTITUDE_DEG} deg",
            state.theta0.amax().to_degrees()
        ));
    }
    None
}

/// Controller input: the plant state with Gaussian noise on the payload
/// velocity and angular rate.
fn measure(state: &SystemState, scenario: &Scenario, rng: &mut ChaCha8Rng) -> SystemState {
    let mut noisy = state.clone();
    for a in 0..3 {
        let nv: f64 = StandardNormal.sample(rng);
        let nw: f64 = StandardNormal.sample(rng);
        noisy.v0[a] += scenario.noise.sigma_v * nv;
        noisy.omega0[a] += scenario.noise.sigma_w * nw;
    }
    noisy
}

fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let idx = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    sorted[idx]
}

/// Runs the scenario: the plant is integrated at `plant_dt` with the true
/// parameters while the controller acts every `control_dt` on the measured
/// state and holds its input in between.
///
/// Tracking or filter infeasibility and plant divergence end the run early;
/// the partial log is returned with the corresponding status.
pub fn run_closed_loop(scenario: &Scenario) -> Result<TrajectoryLog, HarnessError> {
    scenario.validate()?;
    let plant = scenario.plant_params()?;
    let design = scenario.controller_params()?;
    let start = Vector3::from(scenario.initial_position);
    let model = LinearModel::about_hover(&design, start, scenario.control_dt)?
        .with_outputs(&scenario.mpc.outputs(design.n_uavs()))?;
    let config = scenario.mpc.config(&model);
    let (u_lb, u_ub) = scenario.mpc.actuator_bounds(&model);
    let filter = SafetyFilter::new(&scenario.ecbf, &u_lb, &u_ub, &model.u_e)?;
    let mut mpc = MpcController::new(model, config)?;
    let model = mpc.model().clone();
    let (m, np) = (model.input_dim(), mpc.horizon());
    let obstacles = &scenario.obstacles;
    let dt = scenario.control_dt;
    let substeps = scenario.substeps();
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.noise.seed);

    let (mut state, _) = equilibrium(&plant, start);
    let mut barriers = true_barriers(&plant, &state, &scenario.geometry, obstacles, 0.0)?;
    let mut tracker = Tracker {
        max_att: Vector3::zeros(),
        min_h: vec![f64::INFINITY; obstacles.len()],
    };
    tracker.observe(&state, &barriers);

    let mut rows = Vec::with_capacity(scenario.steps());
    let mut status = RunStatus::Completed;
    'control: for k in 0..scenario.steps() {
        let t = k as f64 * dt;
        let measured = measure(&state, scenario, &mut rng);
        let dx = measured.to_vector() - &model.x_e;
        let refs: Vec<DVector<f64>> =
            (0..=np).map(|j| reference_output(&scenario.reference, t + j as f64 * dt, &model.output_names)).collect();

        let clock = Instant::now();
        let tracking = match mpc.solve_tracking(&dx, &refs) {
            Ok(sol) => sol,
            Err(MpcError::Qp(e)) => {
                status = RunStatus::Infeasible {
                    t,
                    reason: format!("tracking QP: {e}"),
                };
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let du_bar = tracking.delta_u.rows(0, m).into_owned();
        let mut set = if scenario.safety_filter && !obstacles.is_empty() {
            let hull = build_hull(&design, &measured, &scenario.geometry)?;
            build_constraints(&hull, obstacles, t, &measured, &model, &dx, &scenario.ecbf)?
        } else {
            BarrierConstraintSet::empty(m)
        };
        let outcome = match filter.apply(&du_bar, &mut set) {
            Ok(o) => o,
            Err(EcbfError::Qp(e @ (QpError::Infeasible { .. } | QpError::MaxIterations { .. }))) => {
                status = RunStatus::Infeasible {
                    t,
                    reason: format!("safety filter: {e}"),
                };
                break;
            }
            Err(e) => return Err(e.into()),
        };
        let solve_ms = clock.elapsed().as_secs_f64() * 1e3;

        let mut active = vec![false; obstacles.len()];
        for d in &set.diagnostics {
            active[d.obstacle] = d.active;
        }
        let margin = set.slack(&outcome.du).iter().copied().fold(f64::INFINITY, f64::min);
        let u = &model.u_e + &outcome.du;
        rows.push(StepRecord {
            t,
            state: state.to_vector(),
            reference: reference_position(&scenario.reference, t),
            u_bar: &model.u_e + &du_bar,
            u: u.clone(),
            h: barriers.h.clone(),
            h_dot: barriers.h_dot.clone(),
            active,
            mpc_iterations: tracking.qp.iterations,
            filter_iterations: outcome.iterations,
            passive: outcome.passive,
            softened: outcome.softened,
            barrier_margin: margin,
            solve_ms,
        });

        let input = ControlInput::from_vector(model.n_uavs, &u)?;
        for s in 0..substeps {
            let ts = t + (s + 1) as f64 * scenario.plant_dt;
            state = match step_rk4(&plant, &state, &input, scenario.plant_dt) {
                Ok(next) => next,
                Err(e) => {
                    status = RunStatus::Unstable { t: ts, reason: e.to_string() };
                    break 'control;
                }
            };
            if let Some(reason) = instability(&state) {
                tracker.max_att = Vector3::repeat(f64::INFINITY);
                status = RunStatus::Unstable { t: ts, reason };
                break 'control;
            }
            barriers = true_barriers(&plant, &state, &scenario.geometry, obstacles, ts)?;
            tracker.observe(&state, &barriers);
        }
    }

    let metrics = summarize(scenario, &rows, &tracker, &status);
    Ok(TrajectoryLog {
        name: scenario.name.clone(),
        state_names: state_names(model.n_uavs),
        input_names: input_names(model.n_uavs),
        n_obstacles: obstacles.len(),
        rows,
        metrics,
        status,
    })
}

fn summarize(scenario: &Scenario, rows: &[StepRecord], tracker: &Tracker, status: &RunStatus) -> Metrics {
    let mut sq = 0.0;
    let mut count = 0usize;
    for r in rows.iter().filter(|r| r.t >= scenario.settle_time) {
        let p = Vector3::new(r.state[0], r.state[1], r.state[2]);
        sq += (p - r.reference).norm_squared();
        count += 1;
    }
    let mut times: Vec<f64> = rows.iter().map(|r| r.solve_ms).collect();
    let mean = if times.is_empty() {
        0.0
    } else {
        times.iter().sum::<f64>() / times.len() as f64
    };
    times.sort_by(f64::total_cmp);
    let deviation = rows.iter().map(|r| (&r.u - &r.u_bar).amax()).fold(0.0, f64::max);
    Metrics {
        rms_position_error: if count == 0 { 0.0 } else { (sq / count as f64).sqrt() },
        max_abs_roll: tracker.max_att.x.to_degrees(),
        max_abs_pitch: tracker.max_att.y.to_degrees(),
        max_abs_yaw: tracker.max_att.z.to_degrees(),
        min_h: tracker.min_h.clone(),
        control_effort: rows.iter().map(|r| r.u.norm() * scenario.control_dt).sum(),
        mean_solve_ms: mean,
        max_solve_ms: times.last().copied().unwrap_or(0.0),
        p99_solve_ms: percentile(&times, 0.99),
        max_filter_deviation: deviation,
        softened_steps: rows.iter().filter(|r| r.softened).count(),
        steps: rows.len(),
        unstable: matches!(status, RunStatus::Unstable { .. }),
        infeasible: matches!(status, RunStatus::Infeasible { .. }),
    }
}
