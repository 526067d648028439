use nalgebra::{Matrix3, Vector3};

use super::DynamicsError;
use crate::Real;

/// Physical description of one UAV and the rigid link that carries it.
#[derive(Debug, Clone, PartialEq)]
pub struct UavParams<T: Real> {
    pub mass: T,
    pub inertia: Matrix3<T>,
    /// Link attachment point on the payload, payload frame (m).
    pub attachment: Vector3<T>,
    pub link_length: T,
}

/// Masses, inertias and geometry of the payload-UAV system.
///
/// Validated on construction: positive masses and link lengths, symmetric
/// positive definite inertias and at least three UAVs.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemParams<T: Real> {
    payload_mass: T,
    payload_inertia: Matrix3<T>,
    uavs: Vec<UavParams<T>>,
    gravity: T,
}

pub const MIN_UAVS: usize = 3;

impl<T: Real> SystemParams<T> {
    pub fn new(
        payload_mass: T,
        payload_inertia: Matrix3<T>,
        uavs: Vec<UavParams<T>>,
        gravity: T,
    ) -> Result<Self, DynamicsError> {
        let bad = |msg: String| Err(DynamicsError::InvalidParams(msg));
        if uavs.len() < MIN_UAVS {
            return bad(format!("need at least {MIN_UAVS} UAVs, got {}", uavs.len()));
        }
        if !(payload_mass > T::zero()) {
            return bad("payload mass must be positive".into());
        }
        if !(gravity > T::zero()) {
            return bad("gravity magnitude must be positive".into());
        }
        check_inertia(&payload_inertia).map_err(|m| DynamicsError::InvalidParams(format!("payload {m}")))?;
        for (i, u) in uavs.iter().enumerate() {
            if !(u.mass > T::zero()) {
                return bad(format!("UAV {i}: mass must be positive"));
            }
            if !(u.link_length > T::zero()) {
                return bad(format!("UAV {i}: link length must be positive"));
            }
            check_inertia(&u.inertia).map_err(|m| DynamicsError::InvalidParams(format!("UAV {i} {m}")))?;
        }
        Ok(Self {
            payload_mass,
            payload_inertia,
            uavs,
            gravity,
        })
    }

    /// Four hummingbird-class UAVs carrying a 3.1 kg box on 3.2 m links.
    pub fn reference_quad() -> Self {
        let uav = |x: f64, y: f64| UavParams {
            mass: T::lit(0.7),
            inertia: Matrix3::from_diagonal_element(T::lit(0.01)),
            attachment: Vector3::new(T::lit(x), T::lit(y), T::lit(-0.25)),
            link_length: T::lit(3.2),
        };
        Self::new(
            T::lit(3.1),
            Matrix3::from_diagonal(&Vector3::new(T::lit(0.29), T::lit(0.29), T::lit(0.55))),
            vec![uav(0.5, 0.5), uav(0.5, -0.5), uav(-0.5, -0.5), uav(-0.5, 0.5)],
            T::lit(9.81),
        )
        .expect("reference parameters are valid")
    }

    /// `n` identical UAVs with attachment points evenly spaced on a circle.
    pub fn regular_polygon(n: usize, radius: f64, payload_mass: f64) -> Result<Self, DynamicsError> {
        let uavs = (0..n)
            .map(|i| {
                let a = std::f64::consts::TAU * i as f64 / n as f64 + std::f64::consts::FRAC_PI_4;
                UavParams {
                    mass: T::lit(0.7),
                    inertia: Matrix3::from_diagonal_element(T::lit(0.01)),
                    attachment: Vector3::new(T::lit(radius * a.cos()), T::lit(radius * a.sin()), T::lit(-0.25)),
                    link_length: T::lit(3.2),
                }
            })
            .collect();
        Self::new(
            T::lit(payload_mass),
            Matrix3::from_diagonal(&Vector3::new(T::lit(0.29), T::lit(0.29), T::lit(0.55))),
            uavs,
            T::lit(9.81),
        )
    }

    /// Copy with a different payload mass (inertia unchanged).
    pub fn with_payload_mass(&self, mass: T) -> Result<Self, DynamicsError> {
        Self::new(mass, self.payload_inertia, self.uavs.clone(), self.gravity)
    }

    pub fn n_uavs(&self) -> usize {
        self.uavs.len()
    }

    pub fn payload_mass(&self) -> T {
        self.payload_mass
    }

    pub fn payload_inertia(&self) -> &Matrix3<T> {
        &self.payload_inertia
    }

    pub fn uavs(&self) -> &[UavParams<T>] {
        &self.uavs
    }

    pub fn uav(&self, i: usize) -> &UavParams<T> {
        &self.uavs[i]
    }

    pub fn gravity(&self) -> T {
        self.gravity
    }

    /// Payload plus all UAV masses.
    pub fn total_mass(&self) -> T {
        self.uavs.iter().fold(self.payload_mass, |acc, u| acc + u.mass)
    }

    /// Payload inertia augmented by the UAV masses lumped at the attachment
    /// points: `J0 - Σ m_i (p_i×)²`.
    pub fn augmented_payload_inertia(&self) -> Matrix3<T> {
        let mut j = self.payload_inertia;
        for u in &self.uavs {
            let ph = super::hat(&u.attachment);
            j -= ph * ph * u.mass;
        }
        j
    }

    /// Length of the state vector: 12 payload entries plus 12 per UAV.
    pub fn state_dim(&self) -> usize {
        super::PAYLOAD_STATES + super::UAV_STATES * self.n_uavs()
    }

    pub fn input_dim(&self) -> usize {
        super::UAV_INPUTS * self.n_uavs()
    }
}

fn check_inertia<T: Real>(j: &Matrix3<T>) -> Result<(), String> {
    let scale = j.abs().max();
    if !((j - j.transpose()).abs().max() <= T::tol(1e-12) * (T::one() + scale)) {
        return Err("inertia must be symmetric".into());
    }
    if j.cholesky().is_none() {
        return Err("inertia must be positive definite".into());
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reference_total_mass() {
        let p = SystemParams::<f64>::reference_quad();
        assert!((p.total_mass() - 5.9).abs() < 1e-12);
        assert_eq!(p.state_dim(), 60);
        assert_eq!(p.input_dim(), 16);
    }

    #[test]
    fn rejects_two_uavs() {
        let p = SystemParams::<f64>::reference_quad();
        let r = SystemParams::new(3.1, Matrix3::identity(), p.uavs()[..2].to_vec(), 9.81);
        assert!(matches!(r, Err(DynamicsError::InvalidParams(_))));
    }

    #[test]
    fn rejects_bad_values() {
        let p = SystemParams::<f64>::reference_quad();
        assert!(p.with_payload_mass(0.0).is_err());
        let mut uavs = p.uavs().to_vec();
        uavs[1].link_length = -1.0;
        assert!(SystemParams::new(3.1, Matrix3::identity(), uavs, 9.81).is_err());
        let mut uavs = p.uavs().to_vec();
        uavs[0].inertia[(0, 1)] = 0.5;
        assert!(SystemParams::new(3.1, Matrix3::identity(), uavs, 9.81).is_err());
        let indefinite = Matrix3::from_diagonal(&Vector3::new(1.0, -1.0, 1.0));
        assert!(SystemParams::new(3.1, indefinite, p.uavs().to_vec(), 9.81).is_err());
    }
}
