//! Nonlinear model of a rigid payload carried by `N` UAVs through rigid,
//! massless links with spherical joints at both ends.
//!
//! Frames follow NED: `+z` points down, gravity acts along `+z` and a positive
//! thrust magnitude pushes a level UAV toward `-z`. The payload translational
//! velocity, its angular velocity, the link directions and the link rates are
//! all resolved in the payload frame.
//!
//! The accelerations `[v̇0, ω̇0, Ω̇_1 … Ω̇_N]` solve `P · a = Q` with the mass
//! matrix from [`assemble_mass_matrix`] and the forcing from
//! [`assemble_forcing`]; the UAV attitudes obey decoupled Euler equations.

mod params;
mod rotation;
mod state;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use thiserror::Error;

pub use params::{SystemParams, UavParams, MIN_UAVS};
pub use rotation::{euler_rates_from_body, euler_to_rotation, hat, rotation_to_euler, GIMBAL_MARGIN};
pub use state::{ControlInput, StateDerivative, SystemState, UavInput, UavState};

use crate::Real;

/// Payload entries of the state vector (`r0, v0, Θ0, ω0`).
pub const PAYLOAD_STATES: usize = 12;
/// Entries per UAV (`q, Ω, Θ, ω`).
pub const UAV_STATES: usize = 12;
/// Inputs per UAV (thrust and three torques).
pub const UAV_INPUTS: usize = 4;
/// Largest accepted plant integration step (s).
pub const MAX_PLANT_STEP: f64 = 0.02;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("invalid system parameters: {0}")]
    InvalidParams(String),
    #[error("pitch {pitch} rad is too close to ±π/2 for the Euler-rate map")]
    GimbalLockProximity { pitch: f64 },
    #[error("mass matrix is singular or the solve produced non-finite values")]
    SingularMassMatrix,
    #[error("integration step {0} s outside (0, {MAX_PLANT_STEP}]")]
    InvalidTimeStep(f64),
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
}

#[inline]
fn e3<T: Real>() -> Vector3<T> {
    Vector3::new(T::zero(), T::zero(), T::one())
}

/// Inertial thrust force of a UAV with attitude `theta`.
pub fn thrust_force<T: Real>(theta: &Vector3<T>, thrust: T) -> Vector3<T> {
    -(euler_to_rotation(theta) * e3::<T>()) * thrust
}

/// Inertial UAV positions `r_i = r0 + R0 (p_i - l_i q_i)`.
pub fn uav_positions<T: Real>(params: &SystemParams<T>, state: &SystemState<T>) -> Vec<Vector3<T>> {
    let r0 = euler_to_rotation(&state.theta0);
    params
        .uavs()
        .iter()
        .zip(&state.uavs)
        .map(|(p, s)| state.r0 + r0 * (p.attachment - s.q * p.link_length))
        .collect()
}

/// Inertial UAV velocities `ṙ_i = ṙ0 + R0 (ω0 × p_i − l_i Ω_i × q_i)`.
pub fn uav_velocities<T: Real>(params: &SystemParams<T>, state: &SystemState<T>) -> Vec<Vector3<T>> {
    let r0 = euler_to_rotation(&state.theta0);
    let r0_dot = r0 * state.v0;
    params
        .uavs()
        .iter()
        .zip(&state.uavs)
        .map(|(p, s)| {
            r0_dot + r0 * (state.omega0.cross(&p.attachment) - s.link_rate.cross(&s.q) * p.link_length)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Energies<T: Real> {
    pub kinetic: T,
    pub potential: T,
}

impl<T: Real> Energies<T> {
    pub fn total(&self) -> T {
        self.kinetic + self.potential
    }
}

/// Kinetic and potential energy; the potential uses `U = -Σ m g k·r`.
pub fn energies<T: Real>(params: &SystemParams<T>, state: &SystemState<T>) -> Energies<T> {
    let half = T::lit(0.5);
    let g = params.gravity();
    let r0_dot = euler_to_rotation(&state.theta0) * state.v0;
    let mut kinetic = half * params.payload_mass() * r0_dot.norm_squared()
        + half * state.omega0.dot(&(params.payload_inertia() * state.omega0));
    let mut potential = -params.payload_mass() * g * state.r0.z;
    let positions = uav_positions(params, state);
    let velocities = uav_velocities(params, state);
    for (((p, s), r), v) in params.uavs().iter().zip(&state.uavs).zip(&positions).zip(&velocities) {
        kinetic += half * p.mass * v.norm_squared() + half * s.omega.dot(&(p.inertia * s.omega));
        potential -= p.mass * g * r.z;
    }
    Energies { kinetic, potential }
}

/// Mass matrix `P` multiplying `[v̇0, ω̇0, Ω̇_1, …, Ω̇_N]`.
///
/// ```text
/// [ m_T I         -Σ m_i p_i×     m_i l_i q_i×      ]
/// [ Σ m_i p_i×     J̄0             m_i l_i p_i× q_i× ]
/// [ -m_i l_i q_i×  m_i l_i q_i× p_i×   m_i l_i² I   ]   (one row per link)
/// ```
///
/// The matrix is symmetric.
pub fn assemble_mass_matrix<T: Real>(params: &SystemParams<T>, state: &SystemState<T>) -> DMatrix<T> {
    let n = params.n_uavs();
    let dim = 6 + 3 * n;
    let mut p_mat = DMatrix::zeros(dim, dim);
    let mut sum_mp = Matrix3::zeros();
    for (i, (up, us)) in params.uavs().iter().zip(&state.uavs).enumerate() {
        let ph = hat(&up.attachment);
        let qh = hat(&us.q);
        let ml = up.mass * up.link_length;
        sum_mp += ph * up.mass;
        let c = 6 + 3 * i;
        p_mat.fixed_view_mut::<3, 3>(0, c).copy_from(&(qh * ml));
        p_mat.fixed_view_mut::<3, 3>(3, c).copy_from(&(ph * qh * ml));
        p_mat.fixed_view_mut::<3, 3>(c, 0).copy_from(&(-qh * ml));
        p_mat.fixed_view_mut::<3, 3>(c, 3).copy_from(&(qh * ph * ml));
        p_mat
            .fixed_view_mut::<3, 3>(c, c)
            .copy_from(&(Matrix3::identity() * (ml * up.link_length)));
    }
    p_mat
        .fixed_view_mut::<3, 3>(0, 0)
        .copy_from(&(Matrix3::identity() * params.total_mass()));
    p_mat.fixed_view_mut::<3, 3>(0, 3).copy_from(&(-sum_mp));
    p_mat.fixed_view_mut::<3, 3>(3, 0).copy_from(&sum_mp);
    p_mat
        .fixed_view_mut::<3, 3>(3, 3)
        .copy_from(&params.augmented_payload_inertia());
    p_mat
}

/// Forcing vector `Q`: gravity, thrust, gyroscopic and centripetal terms.
///
/// Thrusts are taken from `input` and turned into inertial forces with each
/// UAV's own attitude.
pub fn assemble_forcing<T: Real>(
    params: &SystemParams<T>,
    state: &SystemState<T>,
    input: &ControlInput<T>,
) -> DVector<T> {
    let n = params.n_uavs();
    let g = params.gravity();
    let k = e3::<T>();
    let r0t = euler_to_rotation(&state.theta0).transpose();
    let w0 = state.omega0;
    let w0h = hat(&w0);
    let w0_v0 = w0.cross(&state.v0);
    let jbar = params.augmented_payload_inertia();

    let mut trans = -w0_v0 * params.total_mass() + r0t * k * (params.total_mass() * g);
    let mut rot = -w0.cross(&(jbar * w0));
    let mut out = DVector::zeros(6 + 3 * n);

    for (i, ((up, us), ui)) in params.uavs().iter().zip(&state.uavs).zip(&input.uavs).enumerate() {
        let (m, l, p, q, link_rate) = (up.mass, up.link_length, up.attachment, us.q, us.link_rate);
        let force = thrust_force(&us.theta, ui.thrust);
        let w0_link = w0.cross(&link_rate);
        let centripetal = w0h * w0h * p;
        let rate_sq = link_rate.norm_squared();
        let body_load = r0t * (force + k * (m * g));

        trans += r0t * force - (centripetal * m + q * (m * l * rate_sq) + q.cross(&w0_link) * (m * l));
        rot += p.cross(&body_load)
            - (p.cross(&w0_v0) + p.cross(&q.cross(&w0_link)) * l + p.cross(&q) * (l * rate_sq)) * m;
        let link = (q.cross(&centripetal) - w0_link * l + q.cross(&w0_v0)) * (m * l) - q.cross(&body_load) * l;
        out.fixed_rows_mut::<3>(6 + 3 * i).copy_from(&link);
    }
    out.fixed_rows_mut::<3>(0).copy_from(&trans);
    out.fixed_rows_mut::<3>(3).copy_from(&rot);
    out
}

/// State derivative of the payload-UAV system.
pub fn dynamics<T: Real>(
    params: &SystemParams<T>,
    state: &SystemState<T>,
    input: &ControlInput<T>,
) -> Result<StateDerivative<T>, DynamicsError> {
    let n = params.n_uavs();
    if state.n_uavs() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: n,
            got: state.n_uavs(),
        });
    }
    if input.n_uavs() != n {
        return Err(DynamicsError::DimensionMismatch {
            expected: n,
            got: input.n_uavs(),
        });
    }
    let p_mat = assemble_mass_matrix(params, state);
    let q_vec = assemble_forcing(params, state, input);
    let accel = p_mat.lu().solve(&q_vec).ok_or(DynamicsError::SingularMassMatrix)?;
    if accel.iter().any(|a| !a.is_finite()) {
        return Err(DynamicsError::SingularMassMatrix);
    }

    let r0 = euler_to_rotation(&state.theta0);
    let mut uavs = Vec::with_capacity(n);
    for (i, ((up, us), ui)) in params.uavs().iter().zip(&state.uavs).zip(&input.uavs).enumerate() {
        let j_omega = up.inertia * us.omega;
        let omega_dot = up
            .inertia
            .lu()
            .solve(&(ui.torque - us.omega.cross(&j_omega)))
            .ok_or(DynamicsError::SingularMassMatrix)?;
        uavs.push(UavState {
            q: (us.link_rate - state.omega0).cross(&us.q),
            link_rate: accel.fixed_rows::<3>(6 + 3 * i).into_owned(),
            theta: euler_rates_from_body(&us.theta, &us.omega)?,
            omega: omega_dot,
        });
    }
    Ok(StateDerivative {
        r0: r0 * state.v0,
        v0: accel.fixed_rows::<3>(0).into_owned(),
        theta0: euler_rates_from_body(&state.theta0, &state.omega0)?,
        omega0: accel.fixed_rows::<3>(3).into_owned(),
        uavs,
    })
}

/// [`dynamics`] on flattened state and input vectors.
pub fn dynamics_vector<T: Real>(
    params: &SystemParams<T>,
    x: &DVector<T>,
    u: &DVector<T>,
) -> Result<DVector<T>, DynamicsError> {
    let n = params.n_uavs();
    let state = SystemState::from_vector(n, x)?;
    let input = ControlInput::from_vector(n, u)?;
    Ok(dynamics(params, &state, &input)?.to_vector())
}

/// Hover equilibrium with vertical links at payload position `r0`.
///
/// Each UAV carries its own weight plus an equal share of the payload,
/// `F_e = (m_i + m0/N) g`. The pair is a fixed point of [`dynamics`] when the
/// attachment points are centred on the payload's vertical axis.
pub fn equilibrium<T: Real>(params: &SystemParams<T>, r0: Vector3<T>) -> (SystemState<T>, ControlInput<T>) {
    let n = params.n_uavs();
    let z = Vector3::zeros();
    let state = SystemState {
        r0,
        v0: z,
        theta0: z,
        omega0: z,
        uavs: vec![
            UavState {
                q: e3(),
                link_rate: z,
                theta: z,
                omega: z,
            };
            n
        ],
    };
    let share = params.payload_mass() / T::from_usize(n).expect("usize fits");
    let input = ControlInput {
        uavs: params
            .uavs()
            .iter()
            .map(|u| UavInput {
                thrust: (u.mass + share) * params.gravity(),
                torque: z,
            })
            .collect(),
    };
    (state, input)
}

/// One classical Runge-Kutta step with zero-order-hold input, followed by
/// re-projection of the link directions and link rates onto their
/// constraint manifold.
pub fn step_rk4<T: Real>(
    params: &SystemParams<T>,
    state: &SystemState<T>,
    input: &ControlInput<T>,
    dt: T,
) -> Result<SystemState<T>, DynamicsError> {
    if !(dt > T::zero() && dt <= T::lit(MAX_PLANT_STEP) * (T::one() + T::default_epsilon())) {
        return Err(DynamicsError::InvalidTimeStep(dt.as_f64()));
    }
    let n = params.n_uavs();
    let u = input.to_vector();
    let x = state.to_vector();
    let half = dt * T::lit(0.5);
    let k1 = dynamics_vector(params, &x, &u)?;
    let k2 = dynamics_vector(params, &(&x + &k1 * half), &u)?;
    let k3 = dynamics_vector(params, &(&x + &k2 * half), &u)?;
    let k4 = dynamics_vector(params, &(&x + &k3 * dt), &u)?;
    let next = x + (k1 + k2 * T::lit(2.0) + k3 * T::lit(2.0) + k4) * (dt / T::lit(6.0));
    let mut out = SystemState::from_vector(n, &next)?;
    out.project_constraints();
    Ok(out)
}
