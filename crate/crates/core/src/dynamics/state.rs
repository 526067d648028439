use nalgebra::{DVector, Vector3};

use super::{DynamicsError, PAYLOAD_STATES, UAV_INPUTS, UAV_STATES};
use crate::Real;

/// Link and attitude state of one UAV.
#[derive(Debug, Clone, PartialEq)]
pub struct UavState<T: Real> {
    /// Unit link direction pointing toward the payload, payload frame.
    pub q: Vector3<T>,
    /// Link angular velocity (rad/s), payload frame.
    pub link_rate: Vector3<T>,
    /// ZYX Euler angles of the UAV (rad).
    pub theta: Vector3<T>,
    /// UAV body angular velocity (rad/s).
    pub omega: Vector3<T>,
}

/// Full state of the payload-UAV system.
///
/// Flattened layout: `r0, v0, Θ0, ω0` followed by `q_i, Ω_i, Θ_i, ω_i` for
/// each UAV in order.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemState<T: Real> {
    /// Payload position, inertial NED (m).
    pub r0: Vector3<T>,
    /// Payload velocity, payload frame (m/s).
    pub v0: Vector3<T>,
    /// Payload ZYX Euler angles (rad).
    pub theta0: Vector3<T>,
    /// Payload body angular velocity (rad/s).
    pub omega0: Vector3<T>,
    pub uavs: Vec<UavState<T>>,
}

/// Time derivative of [`SystemState`], same layout.
#[derive(Debug, Clone, PartialEq)]
pub struct StateDerivative<T: Real> {
    pub r0: Vector3<T>,
    pub v0: Vector3<T>,
    pub theta0: Vector3<T>,
    pub omega0: Vector3<T>,
    pub uavs: Vec<UavState<T>>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UavInput<T: Real> {
    /// Thrust magnitude (N), acting along the UAV's body up axis.
    pub thrust: T,
    /// Body torque (N·m).
    pub torque: Vector3<T>,
}

/// Per-UAV thrust and torque, flattened as `[F_1, τ_1, …, F_N, τ_N]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlInput<T: Real> {
    pub uavs: Vec<UavInput<T>>,
}

fn slice3<T: Real>(x: &DVector<T>, at: usize) -> Vector3<T> {
    Vector3::new(x[at], x[at + 1], x[at + 2])
}

fn put3<T: Real>(x: &mut DVector<T>, at: usize, v: &Vector3<T>) {
    x.fixed_rows_mut::<3>(at).copy_from(v);
}

fn flatten<T: Real>(
    r0: &Vector3<T>,
    v0: &Vector3<T>,
    theta0: &Vector3<T>,
    omega0: &Vector3<T>,
    uavs: &[UavState<T>],
) -> DVector<T> {
    let mut x = DVector::zeros(PAYLOAD_STATES + UAV_STATES * uavs.len());
    put3(&mut x, 0, r0);
    put3(&mut x, 3, v0);
    put3(&mut x, 6, theta0);
    put3(&mut x, 9, omega0);
    for (i, u) in uavs.iter().enumerate() {
        let b = PAYLOAD_STATES + UAV_STATES * i;
        put3(&mut x, b, &u.q);
        put3(&mut x, b + 3, &u.link_rate);
        put3(&mut x, b + 6, &u.theta);
        put3(&mut x, b + 9, &u.omega);
    }
    x
}

type Unflattened<T> = (Vector3<T>, Vector3<T>, Vector3<T>, Vector3<T>, Vec<UavState<T>>);

fn unflatten<T: Real>(n_uavs: usize, x: &DVector<T>) -> Result<Unflattened<T>, DynamicsError> {
    let expected = PAYLOAD_STATES + UAV_STATES * n_uavs;
    if x.len() != expected {
        return Err(DynamicsError::DimensionMismatch {
            expected,
            got: x.len(),
        });
    }
    let uavs = (0..n_uavs)
        .map(|i| {
            let b = PAYLOAD_STATES + UAV_STATES * i;
            UavState {
                q: slice3(x, b),
                link_rate: slice3(x, b + 3),
                theta: slice3(x, b + 6),
                omega: slice3(x, b + 9),
            }
        })
        .collect();
    Ok((slice3(x, 0), slice3(x, 3), slice3(x, 6), slice3(x, 9), uavs))
}

impl<T: Real> SystemState<T> {
    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn dim(&self) -> usize {
        PAYLOAD_STATES + UAV_STATES * self.uavs.len()
    }

    pub fn to_vector(&self) -> DVector<T> {
        flatten(&self.r0, &self.v0, &self.theta0, &self.omega0, &self.uavs)
    }

    pub fn from_vector(n_uavs: usize, x: &DVector<T>) -> Result<Self, DynamicsError> {
        let (r0, v0, theta0, omega0, uavs) = unflatten(n_uavs, x)?;
        Ok(Self {
            r0,
            v0,
            theta0,
            omega0,
            uavs,
        })
    }

    /// Renormalizes each link direction and removes the component of the link
    /// rate along it, restoring `‖q_i‖ = 1` and `q_i · Ω_i = 0`.
    pub fn project_constraints(&mut self) {
        for u in &mut self.uavs {
            let n = u.q.norm();
            if n > T::zero() {
                u.q /= n;
            }
            let along = u.q.dot(&u.link_rate);
            u.link_rate -= u.q * along;
        }
    }

    /// Largest violation of the unit-norm and orthogonality constraints.
    pub fn constraint_violation(&self) -> T {
        self.uavs.iter().fold(T::zero(), |acc, u| {
            acc.max((u.q.norm() - T::one()).abs())
                .max(u.q.dot(&u.link_rate).abs())
        })
    }

    pub fn is_finite(&self) -> bool {
        self.to_vector().iter().all(|v| v.is_finite())
    }
}

impl<T: Real> StateDerivative<T> {
    pub fn to_vector(&self) -> DVector<T> {
        flatten(&self.r0, &self.v0, &self.theta0, &self.omega0, &self.uavs)
    }

    pub fn from_vector(n_uavs: usize, x: &DVector<T>) -> Result<Self, DynamicsError> {
        let (r0, v0, theta0, omega0, uavs) = unflatten(n_uavs, x)?;
        Ok(Self {
            r0,
            v0,
            theta0,
            omega0,
            uavs,
        })
    }
}

impl<T: Real> ControlInput<T> {
    pub fn zeros(n_uavs: usize) -> Self {
        Self {
            uavs: vec![
                UavInput {
                    thrust: T::zero(),
                    torque: Vector3::zeros()
                };
                n_uavs
            ],
        }
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn dim(&self) -> usize {
        UAV_INPUTS * self.uavs.len()
    }

    pub fn to_vector(&self) -> DVector<T> {
        let mut u = DVector::zeros(self.dim());
        for (i, ui) in self.uavs.iter().enumerate() {
            u[UAV_INPUTS * i] = ui.thrust;
            put3(&mut u, UAV_INPUTS * i + 1, &ui.torque);
        }
        u
    }

    pub fn from_vector(n_uavs: usize, u: &DVector<T>) -> Result<Self, DynamicsError> {
        if u.len() != UAV_INPUTS * n_uavs {
            return Err(DynamicsError::DimensionMismatch {
                expected: UAV_INPUTS * n_uavs,
                got: u.len(),
            });
        }
        Ok(Self {
            uavs: (0..n_uavs)
                .map(|i| UavInput {
                    thrust: u[UAV_INPUTS * i],
                    torque: slice3(u, UAV_INPUTS * i + 1),
                })
                .collect(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn flatten_roundtrip(values in proptest::collection::vec(-10.0f64..10.0, 12 + 3 * 12)) {
            let x = DVector::from_vec(values);
            let s = SystemState::from_vector(3, &x).unwrap();
            prop_assert_eq!(s.to_vector(), x);
        }

        #[test]
        fn projection_restores_constraints(
            q in proptest::array::uniform3(-2.0f64..2.0),
            w in proptest::array::uniform3(-2.0f64..2.0),
        ) {
            let q = Vector3::from(q);
            prop_assume!(q.norm() > 1e-3);
            let mut x = DVector::zeros(12 + 3 * 12);
            for i in 0..3 {
                x.fixed_rows_mut::<3>(12 + 12 * i).copy_from(&q);
                x.fixed_rows_mut::<3>(15 + 12 * i).copy_from(&Vector3::from(w));
            }
            let mut s = SystemState::from_vector(3, &x).unwrap();
            s.project_constraints();
            prop_assert!(s.constraint_violation() < 1e-12);
        }
    }

    #[test]
    fn wrong_length_is_rejected() {
        let x = DVector::<f64>::zeros(50);
        assert!(matches!(
            SystemState::from_vector(4, &x),
            Err(DynamicsError::DimensionMismatch { expected: 60, got: 50 })
        ));
        assert!(ControlInput::<f64>::from_vector(4, &DVector::zeros(15)).is_err());
    }
}
