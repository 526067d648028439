//! Scalar abstraction shared by every numerical module.
//!
//! All of the math in this crate is written against [`Real`], which is
//! implemented for `f32` and `f64`. The simulation harness and the CLI fix
//! the scalar to `f64` through the aliases exported at the crate root.

use nalgebra::RealField;
use num_traits::{FromPrimitive, ToPrimitive};

/// Floating point scalar usable by the dynamics, solvers and controllers.
pub trait Real: RealField + Copy + FromPrimitive + ToPrimitive + Send + Sync {
    /// Converts an `f64` literal into this scalar type.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("literal must be representable")
    }

    /// Returns `x` unless it is below what the type can resolve, in which case
    /// the tolerance is widened to a small multiple of machine epsilon.
    #[inline]
    fn tol(x: f64) -> Self {
        let floor = Self::default_epsilon() * Self::lit(1.0e3);
        let t = Self::lit(x);
        if t < floor {
            floor
        } else {
            t
        }
    }

    /// Lossy conversion used for diagnostics and error payloads.
    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

impl Real for f32 {}
impl Real for f64 {}
