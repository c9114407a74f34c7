//! Numerical laboratory for direct voltage control of the DC-DC boost converter.
//!
//! Everything after the physical-to-scaled conversion in [`model`] works in the
//! dimensionless average model
//!
//! ```text
//! x1' = -d1 x1 + 1 - x2 u
//! x2' = -d2 x2 + x1 u
//! ```
//!
//! with `x1` the scaled inductor current, `x2` the scaled capacitor voltage and
//! `u` the (unsaturated) duty cycle. The crate provides the assignable
//! equilibria, four voltage-feedback controllers (PI, two static IDA-PBC laws
//! and an observer-based PID-PBC), the finite-convergence-time current
//! observer, and the stability machinery (Jacobians, Routh-Hurwitz, zero
//! dynamics, Lyapunov solve, sampled domain-of-attraction estimate) together
//! with a closed-loop simulator.

pub mod analysis;
pub mod controllers;
pub mod equilibria;
pub mod error;
pub mod model;
pub mod observer;
pub mod sim;

pub use error::{Error, Result};
pub use model::{PhysicalParams, ScaledParams, ScaledState};
