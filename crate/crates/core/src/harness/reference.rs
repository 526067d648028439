use nalgebra::{DVector, Vector3};

use super::scenario::ReferenceConfig;

/// Desired payload position at time `t`.
pub fn reference_position(reference: &ReferenceConfig, t: f64) -> Vector3<f64> {
    match reference {
        ReferenceConfig::FigureEight { amp_x, amp_y, omega, z } => {
            let (s, c) = (omega * t).sin_cos();
            Vector3::new(amp_x * s, -amp_y * s * c, *z)
        }
        ReferenceConfig::Waypoints { points } => {
            let first = &points[0];
            if t <= first.t {
                return Vector3::from(first.position);
            }
            for w in points.windows(2) {
                if t <= w[1].t {
                    let a = (t - w[0].t) / (w[1].t - w[0].t);
                    return Vector3::from(w[0].position).lerp(&Vector3::from(w[1].position), a);
                }
            }
            Vector3::from(points[points.len() - 1].position)
        }
    }
}

/// Desired output vector in the order of `output_names`: the reference
/// position, zero payload attitude and vertical links.
pub fn reference_output(reference: &ReferenceConfig, t: f64, output_names: &[String]) -> DVector<f64> {
    let r = reference_position(reference, t);
    DVector::from_iterator(
        output_names.len(),
        output_names.iter().map(|name| match name.as_str() {
            "r0.x" => r.x,
            "r0.y" => r.y,
            "r0.z" => r.z,
            n if n.starts_with('q') && n.ends_with(".z") => 1.0,
            _ => 0.0,
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::harness::Waypoint;
    use crate::linearize::{default_output_selection, expand_selection};
    use approx::assert_relative_eq;
    use std::f64::consts::PI;

    fn figure_eight() -> ReferenceConfig {
        ReferenceConfig::default()
    }

    #[test]
    fn starts_at_altitude() {
        assert_eq!(reference_position(&figure_eight(), 0.0), Vector3::new(0.0, 0.0, -5.0));
    }

    #[test]
    fn lateral_component_is_a_half_amplitude_sine() {
        for t in [0.3, 1.7, PI, 5.0, 11.2] {
            let r = reference_position(&figure_eight(), t);
            assert_relative_eq!(r.y, -3.0 * t.sin(), epsilon = 1e-12);
        }
        let r = reference_position(&figure_eight(), PI);
        assert_relative_eq!(r.x, 6.0, epsilon = 1e-12);
    }

    #[test]
    fn period_is_four_pi() {
        for t in [0.0, 0.9, 2.5, 7.1] {
            let a = reference_position(&figure_eight(), t);
            let b = reference_position(&figure_eight(), t + 4.0 * PI);
            assert_relative_eq!(a, b, epsilon = 1e-12);
        }
    }

    #[test]
    fn waypoints_interpolate_and_hold() {
        let w = ReferenceConfig::Waypoints {
            points: vec![
                Waypoint { t: 1.0, position: [0.0, 0.0, -2.0] },
                Waypoint { t: 3.0, position: [4.0, 0.0, -2.0] },
            ],
        };
        assert_eq!(reference_position(&w, 0.0).x, 0.0);
        assert_relative_eq!(reference_position(&w, 2.0).x, 2.0);
        assert_eq!(reference_position(&w, 9.0).x, 4.0);
    }

    #[test]
    fn output_vector_has_vertical_links() {
        let names = expand_selection(4, &default_output_selection(4)).unwrap();
        let y = reference_output(&figure_eight(), 0.0, &names);
        assert_eq!(y.len(), names.len());
        for (name, v) in names.iter().zip(y.iter()) {
            let expected = match name.as_str() {
                "r0.z" => -5.0,
                n if n.starts_with('q') && n.ends_with(".z") => 1.0,
                _ => 0.0,
            };
            assert_eq!(*v, expected, "{name}");
        }
    }
}
