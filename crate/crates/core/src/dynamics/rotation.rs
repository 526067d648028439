//! Hat map and ZYX Euler angle helpers.

use nalgebra::{Matrix3, Vector3};

use super::DynamicsError;
use crate::Real;

/// Margin kept between the pitch angle and ±π/2.
pub const GIMBAL_MARGIN: f64 = 0.01;

/// Skew-symmetric matrix `S` with `S * w == v.cross(&w)`.
#[inline]
pub fn hat<T: Real>(v: &Vector3<T>) -> Matrix3<T> {
    let z = T::zero();
    Matrix3::new(z, -v.z, v.y, v.z, z, -v.x, -v.y, v.x, z)
}

/// Rotation from the body frame to the inertial frame for ZYX Euler angles
/// `[roll, pitch, yaw]`, i.e. `Rz(yaw) * Ry(pitch) * Rx(roll)`.
pub fn euler_to_rotation<T: Real>(theta: &Vector3<T>) -> Matrix3<T> {
    let (sphi, cphi) = theta.x.sin_cos();
    let (sth, cth) = theta.y.sin_cos();
    let (spsi, cpsi) = theta.z.sin_cos();
    Matrix3::new(
        cpsi * cth,
        cpsi * sth * sphi - spsi * cphi,
        cpsi * sth * cphi + spsi * sphi,
        spsi * cth,
        spsi * sth * sphi + cpsi * cphi,
        spsi * sth * cphi - cpsi * sphi,
        -sth,
        cth * sphi,
        cth * cphi,
    )
}

/// Euler angle rates produced by the body angular velocity `omega`.
///
/// Fails with [`DynamicsError::GimbalLockProximity`] once the pitch comes
/// within [`GIMBAL_MARGIN`] of ±π/2, where the map is singular.
pub fn euler_rates_from_body<T: Real>(
    theta: &Vector3<T>,
    omega: &Vector3<T>,
) -> Result<Vector3<T>, DynamicsError> {
    let limit = T::frac_pi_2() - T::lit(GIMBAL_MARGIN);
    if !(theta.y.abs() < limit) {
        return Err(DynamicsError::GimbalLockProximity {
            pitch: theta.y.as_f64(),
        });
    }
    let (sphi, cphi) = theta.x.sin_cos();
    let cth = theta.y.cos();
    let tth = theta.y.tan();
    let (p, q, r) = (omega.x, omega.y, omega.z);
    let lateral = q * sphi + r * cphi;
    Ok(Vector3::new(
        p + lateral * tth,
        q * cphi - r * sphi,
        lateral / cth,
    ))
}

/// Extracts ZYX Euler angles from a rotation matrix (pitch in [-π/2, π/2]).
pub fn rotation_to_euler<T: Real>(r: &Matrix3<T>) -> Vector3<T> {
    let one = T::one();
    let s = (-r[(2, 0)]).max(-one).min(one);
    Vector3::new(r[(2, 1)].atan2(r[(2, 2)]), s.asin(), r[(1, 0)].atan2(r[(0, 0)]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_PI_2;

    #[test]
    fn hat_zero_is_zero() {
        assert_eq!(hat(&Vector3::<f64>::zeros()), Matrix3::zeros());
    }

    #[test]
    fn hat_follows_right_hand_rule() {
        let s = hat(&Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(s * Vector3::new(0.0, 1.0, 0.0), Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn hat_annihilates_its_argument() {
        let v = Vector3::new(0.3, -1.2, 2.0);
        assert_eq!(hat(&v) * v, Vector3::zeros());
        assert_eq!(hat(&v), -hat(&v).transpose());
    }

    #[test]
    fn identity_at_zero_angles() {
        assert_eq!(euler_to_rotation(&Vector3::<f64>::zeros()), Matrix3::identity());
    }

    #[test]
    fn pure_roll_maps_y_to_z() {
        let r = euler_to_rotation(&Vector3::new(FRAC_PI_2, 0.0, 0.0));
        assert_relative_eq!(
            r * Vector3::new(0.0, 1.0, 0.0),
            Vector3::new(0.0, 0.0, 1.0),
            epsilon = 1e-15
        );
    }

    #[test]
    fn euler_roundtrip() {
        let th = Vector3::new(0.2, -0.4, 1.1);
        assert_relative_eq!(rotation_to_euler(&euler_to_rotation(&th)), th, epsilon = 1e-12);
    }

    #[test]
    fn rates_identity_at_zero_attitude() {
        let w = Vector3::new(0.4, -0.7, 1.3);
        assert_eq!(euler_rates_from_body(&Vector3::zeros(), &w).unwrap(), w);
        assert_eq!(
            euler_rates_from_body(&Vector3::new(0.3, 0.2, 0.1), &Vector3::zeros()).unwrap(),
            Vector3::<f64>::zeros()
        );
    }

    #[test]
    fn gimbal_guard_trips() {
        let th = Vector3::new(0.0, FRAC_PI_2 - 0.005, 0.0);
        assert!(matches!(
            euler_rates_from_body(&th, &Vector3::new(0.1, 0.0, 0.0)),
            Err(DynamicsError::GimbalLockProximity { .. })
        ));
    }

    /// Integrates the Euler angles and the rotation matrix side by side with a
    /// fine explicit scheme and compares the resulting attitudes.
    #[test]
    fn rates_agree_with_rotation_propagation() {
        let omega = Vector3::new(0.1, 0.0, 0.05);
        let mut theta = Vector3::new(0.0, 0.3, 0.0);
        let mut rot = euler_to_rotation(&theta);
        let dt = 1e-4;
        for _ in 0..1000 {
            // RK4 on the angles (omega is constant in the body frame)
            let k1 = euler_rates_from_body(&theta, &omega).unwrap();
            let k2 = euler_rates_from_body(&(theta + k1 * (dt / 2.0)), &omega).unwrap();
            let k3 = euler_rates_from_body(&(theta + k2 * (dt / 2.0)), &omega).unwrap();
            let k4 = euler_rates_from_body(&(theta + k3 * dt), &omega).unwrap();
            theta += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
            // exact exponential update for constant body rate
            let angle = omega.norm() * dt;
            let axis = nalgebra::Unit::new_normalize(omega);
            rot *= nalgebra::Rotation3::from_axis_angle(&axis, angle).into_inner();
        }
        assert!((euler_to_rotation(&theta) - rot).abs().max() < 1e-6);
    }

    #[test]
    fn random_rotation_is_orthonormal() {
        let r = euler_to_rotation(&Vector3::new(0.9, -1.1, 2.7));
        assert!((r.transpose() * r - Matrix3::identity()).abs().max() < 1e-12);
        assert_relative_eq!(r.determinant(), 1.0, epsilon = 1e-12);
    }
}
