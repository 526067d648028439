//! Exponential control barrier functions for obstacle avoidance and the
//! minimal-deviation safety filter applied to the tracking input.
//!
//! For each obstacle the barrier is `h = ‖x_c − x_obs‖² − R_o²`, where `x_c`
//! is the hull point closest to the obstacle. The payload is a double
//! integrator from the input's point of view, so `h` has relative degree
//! two and the constraint `ḧ + k₂ ḣ + k₁ h ≥ 0` is affine in the input
//! through the linearized payload acceleration.

use nalgebra::{DMatrix, DVector, Matrix3, Vector2, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{euler_to_rotation, SystemState};
use crate::hull::{obstacle_state, ConvexHull, HullError, Obstacle};
use crate::linearize::LinearModel;
use crate::qp::{PreparedQp, QpError};
use crate::Real;

/// Rows of the payload velocity derivative in the state vector.
const PAYLOAD_ACCEL_ROWS: usize = 3;

#[derive(Debug, Error)]
pub enum EcbfError {
    #[error("invalid barrier configuration: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hull(#[from] HullError),
    #[error(transparent)]
    Qp(#[from] QpError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EcbfConfig {
    /// Closed-loop poles of the barrier dynamics, both negative.
    pub poles: [f64; 2],
    /// Diagonal of the filter weight; empty means identity.
    pub q_obs: Vec<f64>,
    /// Obstacles farther than this from the payload (beyond their radius)
    /// produce no constraint (m).
    pub sensing_range: f64,
    /// Feed the obstacle's true acceleration to the constraint instead of
    /// assuming it is zero.
    pub use_obstacle_acceleration: bool,
    /// Penalty on the slack that softens barrier rows when the filter QP is
    /// infeasible.
    pub slack_weight: f64,
}

impl Default for EcbfConfig {
    fn default() -> Self {
        Self {
            poles: [-1.5, -1.5],
            q_obs: Vec::new(),
            sensing_range: 15.0,
            use_obstacle_acceleration: false,
            slack_weight: 1e6,
        }
    }
}

impl EcbfConfig {
    /// `(k₁, k₂)` with `s² + k₂ s + k₁` having the configured roots.
    pub fn gains(&self) -> Result<(f64, f64), EcbfError> {
        let [s1, s2] = self.poles;
        if !(s1 < 0.0 && s2 < 0.0) {
            return Err(EcbfError::InvalidConfig(format!("poles must be negative, got {s1}, {s2}")));
        }
        Ok((s1 * s2, -(s1 + s2)))
    }

    pub fn weight(&self, m: usize) -> Result<DVector<f64>, EcbfError> {
        if self.q_obs.is_empty() {
            return Ok(DVector::from_element(m, 1.0));
        }
        if self.q_obs.len() != m || self.q_obs.iter().any(|w| !(*w > 0.0)) {
            return Err(EcbfError::InvalidConfig(format!("Q_obs needs {m} positive entries")));
        }
        Ok(DVector::from_column_slice(&self.q_obs))
    }

    pub fn validate(&self) -> Result<(), EcbfError> {
        self.gains()?;
        if !(self.sensing_range > 0.0) || !(self.slack_weight > 0.0) {
            return Err(EcbfError::InvalidConfig("sensing range and slack weight must be positive".into()));
        }
        Ok(())
    }
}

fn flatten_if<T: Real>(v: Vector3<T>, planar: bool) -> Vector3<T> {
    if planar {
        Vector3::new(v.x, v.y, T::zero())
    } else {
        v
    }
}

/// `‖x_c − x_obs‖² − R_o²`, horizontal components only when `planar`.
pub fn barrier_value<T: Real>(c: &Vector3<T>, obstacle: &Vector3<T>, r_o: T, planar: bool) -> T {
    flatten_if(c - obstacle, planar).norm_squared() - r_o * r_o
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BarrierDerivatives<T: Real> {
    pub h: T,
    pub h_dot: T,
    /// `ḧ = accel_coeff · ẍ_c + accel_const`.
    pub accel_coeff: Vector3<T>,
    pub accel_const: T,
}

/// `normal_space` projects onto the normals of the hull feature that holds
/// `c`; the closest point slides along that feature, so only the normal part
/// of the relative velocity bends `h`.
#[allow(clippy::too_many_arguments)]
pub fn barrier_derivatives<T: Real>(
    c: &Vector3<T>,
    c_dot: &Vector3<T>,
    normal_space: &Matrix3<T>,
    obs_position: &Vector3<T>,
    obs_velocity: &Vector3<T>,
    obs_acceleration: &Vector3<T>,
    r_o: T,
    planar: bool,
) -> BarrierDerivatives<T> {
    let two = T::lit(2.0);
    let d = flatten_if(c - obs_position, planar);
    let v = flatten_if(c_dot - obs_velocity, planar);
    let a_obs = flatten_if(*obs_acceleration, planar);
    BarrierDerivatives {
        h: d.norm_squared() - r_o * r_o,
        h_dot: two * d.dot(&v),
        accel_coeff: d * two,
        accel_const: -two * d.dot(&a_obs) + two * v.dot(&(normal_space * v)),
    }
}

/// Linearized payload acceleration `ẍ_c ≈ a₀ + M_u Δu` at deviation `dx`.
pub fn payload_accel_map<T: Real>(model: &LinearModel<T>, dx: &DVector<T>) -> (Vector3<T>, DMatrix<T>) {
    let rows_a = model.a_c.rows(PAYLOAD_ACCEL_ROWS, 3);
    let a0 = rows_a * dx;
    let m_u = model.b_c.rows(PAYLOAD_ACCEL_ROWS, 3).into_owned();
    (Vector3::new(a0[0], a0[1], a0[2]), m_u)
}

/// Per-obstacle quantities behind one constraint row.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierDiagnostics {
    pub obstacle: usize,
    pub h: f64,
    pub h_dot: f64,
    pub closest_point: Vector3<f64>,
    pub obstacle_position: Vector3<f64>,
    /// Filled in by [`SafetyFilter::apply`].
    pub active: bool,
}

/// `A_obs Δu ≤ B_obs`, one row per obstacle in sensing range.
#[derive(Debug, Clone)]
pub struct BarrierConstraintSet {
    pub a_obs: DMatrix<f64>,
    pub b_obs: DVector<f64>,
    pub diagnostics: Vec<BarrierDiagnostics>,
}

impl BarrierConstraintSet {
    pub fn empty(m: usize) -> Self {
        Self {
            a_obs: DMatrix::zeros(0, m),
            b_obs: DVector::zeros(0),
            diagnostics: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.b_obs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.b_obs.is_empty()
    }

    /// `B_obs − A_obs Δu` for each row.
    pub fn slack(&self, du: &DVector<f64>) -> DVector<f64> {
        &self.b_obs - &self.a_obs * du
    }
}

/// Closest hull point to an obstacle and the normal space of the feature it
/// lies on. Vertical poles are measured at height `z`.
pub fn closest_contact(
    hull: &ConvexHull<f64>,
    obstacle: &Vector3<f64>,
    planar: bool,
    z: f64,
) -> Result<(Vector3<f64>, Matrix3<f64>), EcbfError> {
    if planar {
        let (c, _) = hull.closest_point_xy(&Vector2::new(obstacle.x, obstacle.y), z)?;
        Ok((c, hull.footprint_normal_space(&Vector2::new(c.x, c.y))))
    } else {
        let (c, _) = hull.closest_point(obstacle)?;
        Ok((c, hull.normal_space(&c)))
    }
}

/// Barrier rows for the obstacles within sensing range at time `t`.
///
/// `state` is the (possibly noisy) measured state and `dx` its deviation from
/// the model's equilibrium.
pub fn build_constraints(
    hull: &ConvexHull<f64>,
    obstacles: &[Obstacle],
    t: f64,
    state: &SystemState<f64>,
    model: &LinearModel<f64>,
    dx: &DVector<f64>,
    config: &EcbfConfig,
) -> Result<BarrierConstraintSet, EcbfError> {
    let (k1, k2) = config.gains()?;
    let (a0, m_u) = payload_accel_map(model, dx);
    let c_dot = euler_to_rotation(&state.theta0) * state.v0;
    let m = model.input_dim();
    let mut rows: Vec<(DVector<f64>, f64)> = Vec::new();
    let mut diagnostics = Vec::new();
    for (i, obs) in obstacles.iter().enumerate() {
        let os = obstacle_state(obs, t);
        let planar = obs.is_planar();
        let r_o = obs.effective_radius();
        let gap = flatten_if(state.r0 - os.position, planar).norm() - r_o;
        if gap > config.sensing_range {
            continue;
        }
        let (c, normal_space) = closest_contact(hull, &os.position, planar, state.r0.z)?;
        let a_obs = if config.use_obstacle_acceleration {
            os.acceleration
        } else {
            Vector3::zeros()
        };
        let der = barrier_derivatives(&c, &c_dot, &normal_space, &os.position, &os.velocity, &a_obs, r_o, planar);
        let row = -(m_u.tr_mul(&der.accel_coeff));
        let bound = der.accel_coeff.dot(&a0) + der.accel_const + k1 * der.h + k2 * der.h_dot;
        rows.push((row, bound));
        diagnostics.push(BarrierDiagnostics {
            obstacle: i,
            h: der.h,
            h_dot: der.h_dot,
            closest_point: c,
            obstacle_position: os.position,
            active: false,
        });
    }
    let mut a_obs = DMatrix::zeros(rows.len(), m);
    let mut b_obs = DVector::zeros(rows.len());
    for (k, (row, bound)) in rows.into_iter().enumerate() {
        a_obs.row_mut(k).copy_from(&row.transpose());
        b_obs[k] = bound;
    }
    Ok(BarrierConstraintSet {
        a_obs,
        b_obs,
        diagnostics,
    })
}

#[derive(Debug, Clone)]
pub struct FilterOutcome {
    /// Filtered input deviation `Δu*`.
    pub du: DVector<f64>,
    /// All barrier rows held strictly at the tracking input, which passed
    /// through unchanged.
    pub passive: bool,
    /// The filter QP was infeasible and the barrier rows were softened.
    pub softened: bool,
    pub slack: f64,
    pub iterations: usize,
}

pub const PASSIVITY_SLACK: f64 = 1e-9;

/// Minimal-deviation projection of the tracking input onto the barrier and
/// input-bound constraints.
#[derive(Debug, Clone)]
pub struct SafetyFilter {
    weight: DVector<f64>,
    du_lb: DVector<f64>,
    du_ub: DVector<f64>,
    slack_weight: f64,
}

impl SafetyFilter {
    /// Input bounds are absolute; `u_e` converts them to deviations.
    pub fn new(config: &EcbfConfig, u_lb: &DVector<f64>, u_ub: &DVector<f64>, u_e: &DVector<f64>) -> Result<Self, EcbfError> {
        config.validate()?;
        let m = u_e.len();
        if u_lb.len() != m || u_ub.len() != m {
            return Err(EcbfError::InvalidConfig("input bounds do not match the input dimension".into()));
        }
        Ok(Self {
            weight: config.weight(m)?,
            du_lb: u_lb - u_e,
            du_ub: u_ub - u_e,
            slack_weight: config.slack_weight,
        })
    }

    pub fn apply(&self, du_bar: &DVector<f64>, constraints: &mut BarrierConstraintSet) -> Result<FilterOutcome, EcbfError> {
        let m = du_bar.len();
        let slack = constraints.slack(du_bar);
        if slack.iter().all(|s| *s > PASSIVITY_SLACK) {
            return Ok(FilterOutcome {
                du: du_bar.clone(),
                passive: true,
                softened: false,
                slack: 0.0,
                iterations: 0,
            });
        }
        let (bound_rows, bound_b) = self.bound_rows(m);
        let nb = constraints.len();
        let mut a = DMatrix::zeros(nb + bound_rows.nrows(), m);
        a.rows_mut(0, nb).copy_from(&constraints.a_obs);
        a.rows_mut(nb, bound_rows.nrows()).copy_from(&bound_rows);
        let mut b = DVector::zeros(nb + bound_b.len());
        b.rows_mut(0, nb).copy_from(&constraints.b_obs);
        b.rows_mut(nb, bound_b.len()).copy_from(&bound_b);
        let h = DMatrix::from_diagonal(&self.weight);
        let g = -(&h * du_bar);
        let start = self.clamp(du_bar);
        match PreparedQp::new(&h, &a)?.solve(&g, &b, Some(&start)) {
            Ok(sol) => {
                for (k, d) in constraints.diagnostics.iter_mut().enumerate() {
                    d.active = sol.active_set.contains(&k);
                }
                Ok(FilterOutcome {
                    du: sol.z,
                    passive: false,
                    softened: false,
                    slack: 0.0,
                    iterations: sol.iterations,
                })
            }
            Err(QpError::Infeasible { .. }) => self.softened(du_bar, constraints, &bound_rows, &bound_b),
            Err(e) => Err(e.into()),
        }
    }

    /// Same projection with one slack `s ≥ 0` added to every barrier row and
    /// penalized by `w (s + ½ s²)`; input bounds stay hard.
    fn softened(
        &self,
        du_bar: &DVector<f64>,
        constraints: &mut BarrierConstraintSet,
        bound_rows: &DMatrix<f64>,
        bound_b: &DVector<f64>,
    ) -> Result<FilterOutcome, EcbfError> {
        let m = du_bar.len();
        let nb = constraints.len();
        let nu = bound_rows.nrows();
        let d = m + 1;
        let mut a = DMatrix::zeros(nb + nu + 1, d);
        a.view_mut((0, 0), (nb, m)).copy_from(&constraints.a_obs);
        for k in 0..nb {
            a[(k, m)] = -1.0;
        }
        a.view_mut((nb, 0), (nu, m)).copy_from(bound_rows);
        a[(nb + nu, m)] = -1.0;
        let mut b = DVector::zeros(nb + nu + 1);
        b.rows_mut(0, nb).copy_from(&constraints.b_obs);
        b.rows_mut(nb, nu).copy_from(bound_b);
        let mut h = DMatrix::zeros(d, d);
        for i in 0..m {
            h[(i, i)] = self.weight[i];
        }
        h[(m, m)] = self.slack_weight;
        let mut g = DVector::zeros(d);
        g.rows_mut(0, m).copy_from(&(-(DMatrix::from_diagonal(&self.weight) * du_bar)));
        g[m] = self.slack_weight;
        let start_u = self.clamp(du_bar);
        let violation = (&constraints.b_obs - &constraints.a_obs * &start_u).min().min(0.0);
        let mut start = DVector::zeros(d);
        start.rows_mut(0, m).copy_from(&start_u);
        start[m] = -violation;
        let sol = PreparedQp::new(&h, &a)?.solve(&g, &b, Some(&start))?;
        for (k, diag) in constraints.diagnostics.iter_mut().enumerate() {
            diag.active = sol.active_set.contains(&k);
        }
        Ok(FilterOutcome {
            du: sol.z.rows(0, m).into_owned(),
            passive: false,
            softened: true,
            slack: sol.z[m],
            iterations: sol.iterations,
        })
    }

    fn bound_rows(&self, m: usize) -> (DMatrix<f64>, DVector<f64>) {
        let mut rows = Vec::new();
        for i in 0..m {
            if self.du_ub[i].is_finite() {
                rows.push((i, 1.0, self.du_ub[i]));
            }
            if self.du_lb[i].is_finite() {
                rows.push((i, -1.0, -self.du_lb[i]));
            }
        }
        let mut a = DMatrix::zeros(rows.len(), m);
        let mut b = DVector::zeros(rows.len());
        for (k, (i, s, v)) in rows.into_iter().enumerate() {
            a[(k, i)] = s;
            b[k] = v;
        }
        (a, b)
    }

    fn clamp(&self, du: &DVector<f64>) -> DVector<f64> {
        DVector::from_fn(du.len(), |i, _| du[i].max(self.du_lb[i]).min(self.du_ub[i]))
    }
}
