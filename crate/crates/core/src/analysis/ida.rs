//! Linearisation and sampled attraction region of the static voltage laws
//! in the lossless case, around `x* = (d2 y*^2, y*)`.

use nalgebra::{Matrix2, Vector2};

use super::doa::{estimate_region, DoaEstimate, DoaOptions};
use super::lyapunov::lyapunov_solve_2;
use crate::controllers::{ida_alpha_control, ida_k_control, IdaAlpha, IdaK};
use crate::error::{Error, Result};
use crate::model::{vector_field, ScaledParams, ScaledState};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum StaticLaw {
    Alpha(IdaAlpha),
    K(IdaK),
}

impl StaticLaw {
    pub fn control(&self, y_star: f64, x2: f64) -> Result<f64> {
        match self {
            StaticLaw::Alpha(law) => ida_alpha_control(law, y_star, x2),
            StaticLaw::K(law) => Ok(ida_k_control(law, y_star, x2)),
        }
    }

    /// `du/dx2` at `x2 = y*`.
    pub fn slope_at_target(&self, y_star: f64) -> f64 {
        match self {
            StaticLaw::Alpha(law) => law.alpha / (y_star * y_star),
            StaticLaw::K(law) => (law.k - 2.0) / (law.k * y_star * y_star),
        }
    }
}

pub fn static_closed_loop_field(
    sp: &ScaledParams,
    law: &StaticLaw,
    y_star: f64,
    x: &Vector2<f64>,
) -> Result<Vector2<f64>> {
    let u = law.control(y_star, x[1])?;
    Ok(vector_field(sp, ScaledState::new(x[0], x[1]), u).to_vector())
}

fn lossless_target(sp: &ScaledParams, y_star: f64) -> Result<Vector2<f64>> {
    if sp.d1 != 0.0 {
        return Err(Error::NotApplicable(
            "static laws regulate x* = (d2 y*^2, y*) only when d1 = 0".into(),
        ));
    }
    Ok(Vector2::new(sp.d2 * y_star * y_star, y_star))
}

/// Jacobian of the closed loop at `x*`.
pub fn static_law_jacobian(
    sp: &ScaledParams,
    law: &StaticLaw,
    y_star: f64,
) -> Result<Matrix2<f64>> {
    let target = lossless_target(sp, y_star)?;
    let u = 1.0 / y_star;
    let du = law.slope_at_target(y_star);
    Ok(Matrix2::new(
        -sp.d1,
        -(u + target[1] * du),
        u,
        -sp.d2 + target[0] * du,
    ))
}

/// Quadratic attraction region from the Lyapunov solution of the
/// linearisation with weight `q`.
pub fn static_law_doa(
    sp: &ScaledParams,
    law: &StaticLaw,
    y_star: f64,
    q: &Matrix2<f64>,
    opts: &DoaOptions,
) -> Result<DoaEstimate<2>> {
    let target = lossless_target(sp, y_star)?;
    let a = static_law_jacobian(sp, law, y_star)?;
    let sol = lyapunov_solve_2(&a, q)?;
    estimate_region(
        |x| static_closed_loop_field(sp, law, y_star, x),
        target,
        &sol.p,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    fn fd_jacobian(sp: &ScaledParams, law: &StaticLaw, y: f64) -> Matrix2<f64> {
        let x = Vector2::new(sp.d2 * y * y, y);
        let h = 1e-6;
        let mut j = Matrix2::zeros();
        for c in 0..2 {
            let mut e = Vector2::zeros();
            e[c] = h;
            let d = (static_closed_loop_field(sp, law, y, &(x + e)).unwrap()
                - static_closed_loop_field(sp, law, y, &(x - e)).unwrap())
                / (2.0 * h);
            j.set_column(c, &d);
        }
        j
    }

    #[test]
    fn jacobians_match_finite_differences() {
        let sp = ScaledParams::new(0.0, 1.0).unwrap();
        let alpha = StaticLaw::Alpha(IdaAlpha::new(0.5).unwrap());
        let k = StaticLaw::K(IdaK::new(4.0).unwrap());
        for (law, y) in [(alpha, 2.0), (k, 1.0), (alpha, 0.7), (k, 3.0)] {
            let a = static_law_jacobian(&sp, &law, y).unwrap();
            assert!((a - fd_jacobian(&sp, &law, y)).abs().max() < 1e-7);
        }
        let a = static_law_jacobian(&sp, &k, 1.0).unwrap();
        assert!((a.determinant() - 1.5).abs() < 1e-14);
        assert!((a.trace() + 0.5).abs() < 1e-14);
        let a = static_law_jacobian(&sp, &alpha, 2.0).unwrap();
        assert_eq!(a, Matrix2::new(0.0, -0.75, 0.5, -0.5));
    }

    #[test]
    fn regions_are_nontrivial() {
        let sp = ScaledParams::new(0.0, 1.0).unwrap();
        let k = StaticLaw::K(IdaK::new(4.0).unwrap());
        let est =
            static_law_doa(&sp, &k, 1.0, &Matrix2::identity(), &DoaOptions::default()).unwrap();
        assert!(est.rho > 0.0);
        assert!(est.contains(&Vector2::new(1.0, 1.0)));
        let lossy = ScaledParams::new(0.1, 1.0).unwrap();
        assert!(static_law_jacobian(&lossy, &k, 1.0).is_err());
    }
}
