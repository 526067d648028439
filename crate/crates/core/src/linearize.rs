//! Discrete linear model about the hover equilibrium.
//!
//! Jacobians come from central finite differences of the nonlinear dynamics
//! and are discretized with an exact zero-order hold. `D` is zero.

use nalgebra::{DMatrix, DVector, Vector3};
use thiserror::Error;

use crate::dynamics::{self, DynamicsError, SystemParams, PAYLOAD_STATES, UAV_INPUTS, UAV_STATES};
use crate::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LinearizeError {
    #[error("linearization point is not an equilibrium (residual {residual:e})")]
    NonEquilibriumPoint { residual: f64 },
    #[error("unknown state name `{0}`")]
    UnknownStateName(String),
    #[error("sample time must be positive, got {0}")]
    InvalidSampleTime(f64),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
}

/// Largest equilibrium residual accepted by [`jacobians`].
pub const EQUILIBRIUM_TOLERANCE: f64 = 1e-7;

/// Finite-difference perturbation sizes per variable group.
#[derive(Debug, Clone, Copy)]
pub struct FdSteps<T: Real> {
    pub configuration: T,
    pub rate: T,
    pub thrust: T,
    pub torque: T,
}

impl<T: Real> Default for FdSteps<T> {
    fn default() -> Self {
        // f32 cannot resolve 1e-6 perturbations of O(1) states
        let cfg = if T::default_epsilon() < T::lit(1e-12) {
            T::lit(1e-6)
        } else {
            T::default_epsilon().cbrt()
        };
        Self {
            configuration: cfg,
            rate: cfg,
            thrust: T::lit(1e-4).max(cfg),
            torque: T::lit(1e-4).max(cfg),
        }
    }
}

/// Discrete model `Δx⁺ = A Δx + B Δu`, `Δy = C Δx` about `(x_e, u_e)`.
///
/// The continuous Jacobians are kept alongside because the barrier filter
/// needs instantaneous accelerations.
#[derive(Debug, Clone)]
pub struct LinearModel<T: Real> {
    pub a: DMatrix<T>,
    pub b: DMatrix<T>,
    pub c: DMatrix<T>,
    pub a_c: DMatrix<T>,
    pub b_c: DMatrix<T>,
    pub x_e: DVector<T>,
    pub u_e: DVector<T>,
    pub dt: T,
    pub n_uavs: usize,
    pub output_names: Vec<String>,
}

impl<T: Real> LinearModel<T> {
    /// Linearizes about the hover equilibrium at `r0` and discretizes with
    /// sample time `dt`, using the default output selection.
    pub fn about_hover(params: &SystemParams<T>, r0: Vector3<T>, dt: T) -> Result<Self, LinearizeError> {
        let n = params.n_uavs();
        let (xe, ue) = dynamics::equilibrium(params, r0);
        let (x_e, u_e) = (xe.to_vector(), ue.to_vector());
        let (a_c, b_c) = jacobians(params, &x_e, &u_e, &FdSteps::default())?;
        let (a, b) = discretize(&a_c, &b_c, dt)?;
        let output_names = expand_selection(n, &default_output_selection(n))?;
        let c = output_matrix(n, &output_names)?;
        Ok(Self {
            a,
            b,
            c,
            a_c,
            b_c,
            x_e,
            u_e,
            dt,
            n_uavs: n,
            output_names,
        })
    }

    /// Replaces the output matrix with a new selection.
    pub fn with_outputs(mut self, selection: &[String]) -> Result<Self, LinearizeError> {
        self.output_names = expand_selection(self.n_uavs, selection)?;
        self.c = output_matrix(self.n_uavs, &self.output_names)?;
        Ok(self)
    }

    pub fn state_dim(&self) -> usize {
        self.a.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.ncols()
    }

    pub fn output_dim(&self) -> usize {
        self.c.nrows()
    }

    /// One step of the discrete model.
    pub fn propagate(&self, dx: &DVector<T>, du: &DVector<T>) -> DVector<T> {
        &self.a * dx + &self.b * du
    }
}

/// Central-difference Jacobians `(∂f/∂x, ∂f/∂u)` at an equilibrium.
pub fn jacobians<T: Real>(
    params: &SystemParams<T>,
    x_e: &DVector<T>,
    u_e: &DVector<T>,
    steps: &FdSteps<T>,
) -> Result<(DMatrix<T>, DMatrix<T>), LinearizeError> {
    let f0 = dynamics::dynamics_vector(params, x_e, u_e)?;
    let residual = f0.amax();
    if !(residual < T::tol(EQUILIBRIUM_TOLERANCE)) {
        return Err(LinearizeError::NonEquilibriumPoint {
            residual: residual.as_f64(),
        });
    }
    let n = x_e.len();
    let m = u_e.len();
    let two = T::lit(2.0);
    let mut a_c = DMatrix::zeros(n, n);
    for j in 0..n {
        let h = if is_rate_index(j) { steps.rate } else { steps.configuration };
        let mut xp = x_e.clone();
        let mut xm = x_e.clone();
        xp[j] += h;
        xm[j] -= h;
        let col = (dynamics::dynamics_vector(params, &xp, u_e)? - dynamics::dynamics_vector(params, &xm, u_e)?)
            / (two * h);
        a_c.set_column(j, &col);
    }
    let mut b_c = DMatrix::zeros(n, m);
    for j in 0..m {
        let h = if j % UAV_INPUTS == 0 { steps.thrust } else { steps.torque };
        let mut up = u_e.clone();
        let mut um = u_e.clone();
        up[j] += h;
        um[j] -= h;
        let col = (dynamics::dynamics_vector(params, x_e, &up)? - dynamics::dynamics_vector(params, x_e, &um)?)
            / (two * h);
        b_c.set_column(j, &col);
    }
    Ok((a_c, b_c))
}

fn is_rate_index(j: usize) -> bool {
    let local = if j < PAYLOAD_STATES {
        j
    } else {
        (j - PAYLOAD_STATES) % UAV_STATES
    };
    matches!(local / 3, 1 | 3)
}

/// Zero-order-hold discretization: `A = exp(A_c dt)` and
/// `B = ∫₀^dt exp(A_c s) ds · B_c`, both read off the exponential of the
/// augmented matrix `[[A_c, B_c], [0, 0]] · dt`.
pub fn discretize<T: Real>(
    a_c: &DMatrix<T>,
    b_c: &DMatrix<T>,
    dt: T,
) -> Result<(DMatrix<T>, DMatrix<T>), LinearizeError> {
    if !(dt > T::zero()) {
        return Err(LinearizeError::InvalidSampleTime(dt.as_f64()));
    }
    let n = a_c.nrows();
    let m = b_c.ncols();
    let mut aug = DMatrix::zeros(n + m, n + m);
    aug.view_mut((0, 0), (n, n)).copy_from(&(a_c * dt));
    aug.view_mut((0, n), (n, m)).copy_from(&(b_c * dt));
    let e = expm(&aug);
    Ok((e.view((0, 0), (n, n)).into_owned(), e.view((0, n), (n, m)).into_owned()))
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T: Real>(m: &DMatrix<T>) -> DMatrix<T> {
    let n = m.nrows();
    let norm1 = (0..m.ncols())
        .map(|j| m.column(j).iter().fold(T::zero(), |s, v| s + v.abs()))
        .fold(T::zero(), |a, b| a.max(b));
    let mut squarings = 0u32;
    let mut scale = T::one();
    let half = T::lit(0.5);
    while norm1 * scale > half {
        scale *= half;
        squarings += 1;
    }
    let scaled = m * scale;
    let tol = T::tol(1e-12) * T::lit(1e-3);
    let mut sum = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..=40 {
        term = &term * &scaled / T::from_usize(k).expect("small");
        sum += &term;
        if term.amax() <= tol * sum.amax() {
            break;
        }
    }
    for _ in 0..squarings {
        sum = &sum * &sum;
    }
    sum
}

const GROUP_NAMES: [&str; 4] = ["r0", "v0", "theta0", "omega0"];
const UAV_GROUP_NAMES: [&str; 4] = ["q", "link_rate", "theta", "omega"];

fn component_suffix(group: &str, k: usize) -> &'static str {
    if group.starts_with("theta") {
        ["roll", "pitch", "yaw"][k]
    } else {
        ["x", "y", "z"][k]
    }
}

/// Names of every state component in layout order, e.g. `r0.x`,
/// `theta0.yaw`, `q2.z`, `omega4.y` (UAVs are numbered from 1).
pub fn state_names(n_uavs: usize) -> Vec<String> {
    let mut names = Vec::with_capacity(PAYLOAD_STATES + UAV_STATES * n_uavs);
    for g in GROUP_NAMES {
        for k in 0..3 {
            names.push(format!("{g}.{}", component_suffix(g, k)));
        }
    }
    for i in 1..=n_uavs {
        for g in UAV_GROUP_NAMES {
            for k in 0..3 {
                names.push(format!("{g}{i}.{}", component_suffix(g, k)));
            }
        }
    }
    names
}

/// Names of the input components: `F1, tau1.x, tau1.y, tau1.z, F2, …`.
pub fn input_names(n_uavs: usize) -> Vec<String> {
    (1..=n_uavs)
        .flat_map(|i| {
            [
                format!("F{i}"),
                format!("tau{i}.x"),
                format!("tau{i}.y"),
                format!("tau{i}.z"),
            ]
        })
        .collect()
}

/// Payload position, payload attitude and every link direction.
pub fn default_output_selection(n_uavs: usize) -> Vec<String> {
    let mut sel = vec!["r0".to_string(), "theta0".to_string()];
    sel.extend((1..=n_uavs).map(|i| format!("q{i}")));
    sel
}

/// Expands group names (`r0`, `q3`) into component names, keeping
/// component names (`r0.z`) as they are.
pub fn expand_selection(n_uavs: usize, selection: &[String]) -> Result<Vec<String>, LinearizeError> {
    let all = state_names(n_uavs);
    let mut out = Vec::new();
    for s in selection {
        if all.iter().any(|n| n == s) {
            out.push(s.clone());
            continue;
        }
        let prefix = format!("{s}.");
        let group: Vec<_> = all.iter().filter(|n| n.starts_with(&prefix)).cloned().collect();
        if group.is_empty() {
            return Err(LinearizeError::UnknownStateName(s.clone()));
        }
        out.extend(group);
    }
    Ok(out)
}

/// Index of a component name in the state vector.
pub fn state_index(n_uavs: usize, name: &str) -> Result<usize, LinearizeError> {
    state_names(n_uavs)
        .iter()
        .position(|n| n == name)
        .ok_or_else(|| LinearizeError::UnknownStateName(name.to_string()))
}

/// Selector matrix with one row per requested state (groups expand to their
/// three components).
pub fn output_matrix<T: Real>(n_uavs: usize, selection: &[String]) -> Result<DMatrix<T>, LinearizeError> {
    let names = expand_selection(n_uavs, selection)?;
    let n = PAYLOAD_STATES + UAV_STATES * n_uavs;
    let mut c = DMatrix::zeros(names.len(), n);
    for (row, name) in names.iter().enumerate() {
        c[(row, state_index(n_uavs, name)?)] = T::one();
    }
    Ok(c)
}
