//! Input dynamics with the voltage pinned at `x2 = y*`:
//! `u' = phi(u) = (u/d2) w(u)`, `w(u) = u^2 - u/y* + d1 d2`.

use crate::error::{Error, Result};
use crate::model::ScaledParams;

use super::charpoly::Verdict;

/// Relative tolerance on the discriminant of `w` for the tangent case.
const TANGENCY_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ZeroDynamicsPoint {
    pub u: f64,
    /// `phi'(u)`; positive means unstable.
    pub slope: f64,
    pub tag: Verdict,
    /// Double root of `w` (tangent case).
    pub double: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZeroDynamics {
    pub params: ScaledParams,
    pub y_star: f64,
    /// `u = 0` first, then the roots of `w` in increasing order.
    pub equilibria: Vec<ZeroDynamicsPoint>,
}

impl ZeroDynamics {
    pub fn rhs(&self, u: f64) -> f64 {
        zero_dynamics_rhs(&self.params, self.y_star, u)
    }

    pub fn slope(&self, u: f64) -> f64 {
        zero_dynamics_slope(&self.params, self.y_star, u)
    }

    /// Minimiser `1/(2 y*)` of `w`.
    pub fn w_minimiser(&self) -> f64 {
        0.5 / self.y_star
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &ZeroDynamicsPoint> {
        self.equilibria.iter().filter(|p| p.u != 0.0)
    }

    /// The largest nonzero equilibrium, if any.
    pub fn largest(&self) -> Option<&ZeroDynamicsPoint> {
        self.nonzero().last()
    }
}

pub fn zero_dynamics_rhs(sp: &ScaledParams, y_star: f64, u: f64) -> f64 {
    u / sp.d2 * (u * u - u / y_star + sp.d1 * sp.d2)
}

pub fn zero_dynamics_slope(sp: &ScaledParams, y_star: f64, u: f64) -> f64 {
    (3.0 * u * u - 2.0 * u / y_star + sp.d1 * sp.d2) / sp.d2
}

fn tag(slope: f64) -> Verdict {
    if slope.abs() <= TANGENCY_TOL {
        Verdict::Marginal
    } else if slope > 0.0 {
        Verdict::Unstable
    } else {
        Verdict::Stable
    }
}

pub fn zero_dynamics(sp: &ScaledParams, y_star: f64) -> Result<ZeroDynamics> {
    sp.validate()?;
    if !(y_star.is_finite() && y_star > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "y* must be finite and > 0, got {y_star}"
        )));
    }
    let point = |u: f64, double: bool| {
        let slope = zero_dynamics_slope(sp, y_star, u);
        ZeroDynamicsPoint {
            u,
            slope,
            tag: tag(slope),
            double,
        }
    };
    let mut equilibria = vec![point(0.0, false)];
    let b = 1.0 / y_star;
    let c = sp.d1 * sp.d2;
    let disc = b * b - 4.0 * c;
    if disc.abs() <= TANGENCY_TOL * b * b {
        equilibria.push(point(0.5 * b, true));
    } else if disc > 0.0 {
        let sq = disc.sqrt();
        let big = 0.5 * (b + sq);
        let small = if big > 0.0 { c / big } else { 0.0 };
        if small != 0.0 {
            equilibria.push(point(small, false));
        }
        equilibria.push(point(big, false));
    }
    Ok(ZeroDynamics {
        params: *sp,
        y_star,
        equilibria,
    })
}
