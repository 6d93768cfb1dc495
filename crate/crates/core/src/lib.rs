//! Switching-time optimization for a semilinear heat equation.
//!
//! The state solves `∂_t y − Δy + f(y) = c(t) ψ + r` on the unit square with
//! homogeneous Dirichlet data, and the control `c` switches on and off at the
//! times `τ_1 ≤ … ≤ τ_n`. The crate discretizes the state with P1 finite
//! elements and a semi-implicit time stepper, differentiates the discrete
//! tracking objective through an adjoint solve, and minimizes it over the
//! ordered switching times with a projected gradient method.

pub mod control;
pub mod error;
pub mod experiments;
pub mod mesh;
pub mod objective;
pub mod optimizer;
pub mod parabolic;
pub mod projection;
pub mod sparse;

pub use error::{Error, Result};
