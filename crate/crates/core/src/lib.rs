//! Cooperative transport of a rigid payload by several UAVs on rigid links.
//!
//! The crate contains the nonlinear plant, its linearization, a dense
//! active-set QP solver, a condensed linear MPC tracker, safe-convex-hull
//! geometry, an exponential control barrier function safety filter and a
//! closed-loop experiment harness.
//!
//! Numerical modules are generic over [`Real`] (`f32` or `f64`). The harness
//! works in `f64`; the aliases below fix the scalar for everyday use.

// `!(a < b)` also rejects NaN, which is the intent at every use.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod dynamics;
pub mod harness;
pub mod ecbf;
pub mod hull;
pub mod linearize;
pub mod mpc;
pub mod qp;
pub mod scalar;

pub use scalar::Real;

/// Scalar used by the harness and the CLI.
pub type Scalar = f64;

pub type SystemParams = dynamics::SystemParams<f64>;
pub type SystemState = dynamics::SystemState<f64>;
pub type ControlInput = dynamics::ControlInput<f64>;
pub type StateDerivative = dynamics::StateDerivative<f64>;
pub type LinearModel = linearize::LinearModel<f64>;
