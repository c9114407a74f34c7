//! Linearization of the PI closed loop `chi = (x1, x2, x_c)` and the
//! coefficient algebra of its characteristic polynomial at the equilibria.

use nalgebra::Matrix3;

use super::charpoly::{routh_hurwitz, CharPoly3, StabilityReport};
use crate::controllers::PiGains;
use crate::equilibria::{branch_offset, pi_equilibria, Branch, EquilibriumPoint};
use crate::error::{Error, Result};
use crate::model::ScaledParams;

/// Jacobian of the PI closed-loop field at an arbitrary `chi`.
pub fn pi_jacobian(sp: &ScaledParams, g: &PiGains, y_star: f64, chi: [f64; 3]) -> Matrix3<f64> {
    let [x1, x2, x3] = chi;
    let drive = g.u0 + g.ki * x3 + g.kp * y_star;
    Matrix3::new(
        -sp.d1,
        -drive + 2.0 * g.kp * x2,
        -g.ki * x2,
        drive - g.kp * x2,
        -sp.d2 - g.kp * x1,
        g.ki * x1,
        0.0,
        -1.0,
        0.0,
    )
}

fn require_chi(eq: &EquilibriumPoint) -> Result<(f64, f64)> {
    match eq.x3_bar {
        Some(x3) => Ok((eq.x1_bar, x3)),
        None => Err(Error::NotApplicable(
            "PI characteristic polynomial needs the integrator component".into(),
        )),
    }
}

/// Closed-form coefficients at a PI equilibrium `(x1, y*, x3)`.
pub fn pi_charpoly(
    sp: &ScaledParams,
    g: &PiGains,
    y_star: f64,
    eq: &EquilibriumPoint,
) -> Result<CharPoly3> {
    let (x1, x3) = require_chi(eq)?;
    let (d1, d2) = (sp.d1, sp.d2);
    let (kp, ki, u0) = (g.kp, g.ki, g.u0);
    let a0 = -ki * (ki * x3 * y_star - d1 * x1 + u0 * y_star);
    let a1 = ki * ki * x3 * x3
        + (2.0 * u0 * x3 + x1 - kp * x3 * y_star) * ki
        + (d1 * x1 - u0 * y_star) * kp
        + d1 * d2
        + u0 * u0;
    let a2 = kp * x1 + d1 + d2;
    Ok(CharPoly3::new(a0, a1, a2))
}

/// Coefficients specialised to the maximal-current branch, written in `r`.
/// Every term is nonnegative.
pub fn maximal_branch_charpoly(sp: &ScaledParams, g: &PiGains, y_star: f64) -> Result<CharPoly3> {
    if sp.d1 <= 0.0 {
        return Err(Error::NotApplicable(
            "maximal-current branch needs d1 > 0".into(),
        ));
    }
    let r = branch_offset(sp, y_star)?;
    let (d1, d2, y2) = (sp.d1, sp.d2, y_star * y_star);
    let a0 = 2.0 * g.ki * r;
    let a1 = (4.0 * d1 * d1 * d2 * y2
        + 8.0 * r * g.kp * y2 * d1
        + 4.0 * (r - 0.5).powi(2) * d1
        + 4.0 * g.ki * y2 * (0.5 + r))
        / (4.0 * d1 * y2);
    let a2 = g.kp / d1 * (0.5 + r) + d1 + d2;
    Ok(CharPoly3::new(a0, a1, a2))
}

/// `a0` on the minimal-current branch, `-2 K_I r`.
pub fn minimal_branch_a0(sp: &ScaledParams, g: &PiGains, y_star: f64) -> Result<f64> {
    Ok(-2.0 * g.ki * branch_offset(sp, y_star)?)
}

/// Stability report of every PI equilibrium, paired with the equilibrium.
pub fn pi_stability(
    sp: &ScaledParams,
    g: &PiGains,
    y_star: f64,
) -> Result<Vec<(EquilibriumPoint, StabilityReport)>> {
    pi_equilibria(sp, y_star, g)?
        .into_iter()
        .map(|eq| Ok((eq, routh_hurwitz(&pi_charpoly(sp, g, y_star, &eq)?))))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GainConditions {
    /// `K_P >= d1^2 / 2`.
    pub proportional: bool,
    /// `K_I >= (5/16) d1 / y*^2`.
    pub integral: bool,
}

impl GainConditions {
    pub fn both(&self) -> bool {
        self.proportional && self.integral
    }
}

/// Sufficient gain tuning for the maximal-current branch.
pub fn gain_conditions(d1: f64, y_star: f64, kp: f64, ki: f64) -> Result<GainConditions> {
    if !(d1 > 0.0) {
        return Err(Error::NotApplicable(
            "gain conditions are stated for d1 > 0".into(),
        ));
    }
    Ok(GainConditions {
        proportional: kp >= 0.5 * d1 * d1,
        integral: ki >= 5.0 / 16.0 * d1 / (y_star * y_star),
    })
}

pub fn p1(d1: f64, r: f64) -> f64 {
    d1.powi(3) * (8.0 * r * r - 8.0 * r + 2.0)
}

pub fn p2(d1: f64, d2: f64, ki: f64, y_star: f64, r: f64) -> f64 {
    let y2 = y_star * y_star;
    d2 * d1 * d1 * (8.0 * r * r - 8.0 * r + 2.0) + d1 * d1 * (-8.0 * ki * y2 * r + 4.0 * ki * y2)
}

pub fn p3(d1: f64, kp: f64, r: f64) -> f64 {
    8.0 * kp * d1 * r * (r * r - 0.5 * r - 0.25)
}

/// Lower bound `-(5/2) K_P d1 r` of [`p3`].
pub fn p3_lower_bound(d1: f64, kp: f64, r: f64) -> f64 {
    -2.5 * kp * d1 * r
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppendixCheck {
    /// `a1 a2 - a0` at the maximal-current equilibrium.
    pub value: f64,
    pub r: f64,
    pub p1: f64,
    pub p2: f64,
    pub p3: f64,
    /// `8 K_P K_I y*^2 r^2`, which dominates the negative part of `p2`.
    pub dominating_quadratic: f64,
    /// `8 K_P K_I y*^2 r`, which dominates the negative part of `p3`.
    pub dominating_linear: f64,
    /// All four Routh-Hurwitz conditions hold at the maximal branch.
    pub all_conditions: bool,
    pub passed: bool,
}

/// Numeric check of `a1 a2 - a0 > 0` on the maximal-current branch together
/// with the auxiliary polynomials used to bound its negative terms.
pub fn appendix_a_check(sp: &ScaledParams, g: &PiGains, y_star: f64) -> Result<AppendixCheck> {
    if sp.d1 <= 0.0 {
        return Err(Error::NotApplicable(
            "maximal-current branch needs d1 > 0".into(),
        ));
    }
    let r = branch_offset(sp, y_star)?;
    let eq = pi_equilibria(sp, y_star, g)?
        .into_iter()
        .find(|e| e.branch == Branch::MaximalCurrent)
        .ok_or_else(|| Error::NotApplicable("no maximal-current equilibrium".into()))?;
    let cp = pi_charpoly(sp, g, y_star, &eq)?;
    let value = cp.hurwitz_determinant();
    let y2 = y_star * y_star;
    Ok(AppendixCheck {
        value,
        r,
        p1: p1(sp.d1, r),
        p2: p2(sp.d1, sp.d2, g.ki, y_star, r),
        p3: p3(sp.d1, g.kp, r),
        dominating_quadratic: 8.0 * g.kp * g.ki * y2 * r * r,
        dominating_linear: 8.0 * g.kp * g.ki * y2 * r,
        all_conditions: cp.a0 > 0.0 && cp.a1 > 0.0 && cp.a2 > 0.0 && value > 0.0,
        passed: value > 0.0,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::charpoly::{RouthCondition, Verdict};
    use crate::controllers::pi_closed_loop_field;

    fn lossy_gains() -> (ScaledParams, PiGains) {
        (
            ScaledParams::new(0.25, 0.75).unwrap(),
            PiGains::new(2.0, 1.0, 0.5).unwrap(),
        )
    }

    fn fd_jacobian(sp: &ScaledParams, g: &PiGains, y: f64, chi: [f64; 3]) -> Matrix3<f64> {
        let h = 1e-5;
        let mut j = Matrix3::zeros();
        for c in 0..3 {
            let mut p = chi;
            let mut m = chi;
            p[c] += h;
            m[c] -= h;
            let fp = pi_closed_loop_field(sp, g, y, p);
            let fm = pi_closed_loop_field(sp, g, y, m);
            for r in 0..3 {
                j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
            }
        }
        j
    }

    #[test]
    fn jacobian_at_minimal_branch() {
        let (sp, g) = lossy_gains();
        let j = pi_jacobian(&sp, &g, 1.0, [1.0, 1.0, 0.25]);
        let expected = Matrix3::new(-0.25, 1.25, -1.0, 0.75, -2.75, 1.0, 0.0, -1.0, 0.0);
        assert!((j - expected).abs().max() < 1e-15);
        assert!(
            (fd_jacobian(&sp, &g, 1.0, [1.0, 1.0, 0.25]) - expected)
                .abs()
                .max()
                < 1e-6
        );
    }

    #[test]
    fn integrator_row_is_constant() {
        let (sp, g) = lossy_gains();
        for chi in [[0.0, 0.0, 0.0], [5.0, -3.0, 2.0], [-1e3, 7.0, 1e2]] {
            let j = pi_jacobian(&sp, &g, 1.3, chi);
            assert_eq!([j[(2, 0)], j[(2, 1)], j[(2, 2)]], [0.0, -1.0, 0.0]);
        }
    }

    #[test]
    fn lossless_a0_is_minus_ki() {
        let sp = ScaledParams::new(0.0, 1.0).unwrap();
        let g = PiGains::new(2.0, 1.0, 0.5).unwrap();
        let res = pi_stability(&sp, &g, 2.0).unwrap();
        assert_eq!(res.len(), 1);
        let rep = res[0].1;
        assert!((rep.charpoly.a0 + 1.0).abs() < 1e-12);
        assert_eq!(rep.verdict, Verdict::Unstable);
        assert_eq!(rep.failing_condition, Some(RouthCondition::A0Positive));
    }

    #[test]
    fn branch_coefficients() {
        let (sp, g) = lossy_gains();
        let res = pi_stability(&sp, &g, 1.0).unwrap();
        let (min_eq, min_rep) = res[0];
        assert_eq!(min_eq.branch, Branch::MinimalCurrent);
        assert!((min_rep.charpoly.a0 + 0.5).abs() < 1e-12);
        assert!((minimal_branch_a0(&sp, &g, 1.0).unwrap() + 0.5).abs() < 1e-15);
        assert_eq!(min_rep.verdict, Verdict::Unstable);

        let (_, max_rep) = res[1];
        let cp = max_rep.charpoly;
        assert!((cp.a0 - 0.5).abs() < 1e-12);
        assert!((cp.a1 - 4.25).abs() < 1e-12);
        assert!((cp.a2 - 7.0).abs() < 1e-12);
        assert!((cp.hurwitz_determinant() - 29.25).abs() < 1e-11);
        assert_eq!(max_rep.verdict, Verdict::Stable);

        let branch = maximal_branch_charpoly(&sp, &g, 1.0).unwrap();
        assert!((branch.a0 - cp.a0).abs() < 1e-12);
        assert!((branch.a1 - cp.a1).abs() < 1e-12);
        assert!((branch.a2 - cp.a2).abs() < 1e-12);

        let oracle = CharPoly3::from_matrix(&pi_jacobian(&sp, &g, 1.0, res[1].0.chi().unwrap()));
        assert!((oracle.a0 - 0.5).abs() < 1e-12);
        assert!((oracle.a1 - 4.25).abs() < 1e-12);
        assert!((oracle.a2 - 7.0).abs() < 1e-12);
    }

    #[test]
    fn gain_condition_examples() {
        assert_eq!(
            gain_conditions(0.25, 1.0, 2.0, 1.0).unwrap(),
            GainConditions {
                proportional: true,
                integral: true
            }
        );
        assert!(gain_conditions(0.3, 1.0, 0.045, 1.0).unwrap().proportional);
        let gc = gain_conditions(1.0, 0.25, 10.0, 1.0).unwrap();
        assert!(!gc.integral);
        assert!(matches!(
            gain_conditions(0.0, 1.0, 1.0, 1.0),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn tuning_margin_example() {
        let (sp, g) = lossy_gains();
        let chk = appendix_a_check(&sp, &g, 1.0).unwrap();
        assert!((chk.value - 29.25).abs() < 1e-11);
        assert!(chk.passed && chk.all_conditions);
        assert_eq!(chk.r, 0.25);
        assert!(chk.p1 >= 0.0);
        assert!(chk.p3 >= p3_lower_bound(sp.d1, g.kp, chk.r));
    }

    #[test]
    fn p1_is_a_perfect_square_and_p3_bound_holds() {
        let n = 10_000;
        let mut min_quad = f64::INFINITY;
        for i in 1..n {
            let r = 0.5 * i as f64 / n as f64;
            assert!((p1(1.0, r) - 2.0 * (2.0 * r - 1.0).powi(2)).abs() < 1e-14);
            min_quad = min_quad.min(r * r - 0.5 * r - 0.25);
            assert!(p3(0.7, 3.0, r) >= p3_lower_bound(0.7, 3.0, r));
        }
        assert!(min_quad >= -5.0 / 16.0);
        assert!((min_quad + 5.0 / 16.0).abs() < 1e-7);
    }
}
