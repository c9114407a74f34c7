//! Stability machinery: Jacobians and characteristic polynomials of the PI
//! loop, Routh-Hurwitz classification, zero dynamics, Lyapunov equations and
//! sampled domain-of-attraction estimates.

pub mod charpoly;
pub mod doa;
pub mod ida;
pub mod lyapunov;
pub mod pi;
pub mod zero_dynamics;

pub use charpoly::{
    routh_hurwitz, CharPoly3, Complex64, RouthCondition, StabilityReport, Verdict, MARGINAL_BAND,
};
pub use doa::{estimate_doa, estimate_region, unit_sphere_lattice, DoaEstimate, DoaOptions};
pub use ida::{static_closed_loop_field, static_law_doa, static_law_jacobian, StaticLaw};
pub use lyapunov::{lyapunov_solve, lyapunov_solve_2, LyapunovSolution};
pub use pi::{
    appendix_a_check, gain_conditions, maximal_branch_charpoly, minimal_branch_a0, p1, p2, p3,
    p3_lower_bound, pi_charpoly, pi_jacobian, pi_stability, AppendixCheck, GainConditions,
};
pub use zero_dynamics::{zero_dynamics, ZeroDynamics, ZeroDynamicsPoint};
