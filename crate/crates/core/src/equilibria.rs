//! Assignable equilibria, their constant controls, and the PI closed-loop
//! equilibria.
//!
//! For `d1 = 0` the output `x2 = y*` is held by a single equilibrium
//! `(d2 y*^2, y*)` with `u = 1/y*`. For `d1 > 0` there are two, a minimal- and
//! a maximal-current one, provided `d1 d2 < 1 / (4 y*^2)`. Both branches are
//! written in terms of `r = sqrt(1 - 4 d1 d2 y*^2) / 2`.

use crate::controllers::{pi_closed_loop_field, PiGains};
use crate::error::{Error, Result};
use crate::model::{vector_field, ScaledParams, ScaledState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Branch {
    Unique,
    MinimalCurrent,
    MaximalCurrent,
}

impl Branch {
    pub fn label(self) -> &'static str {
        match self {
            Branch::Unique => "unique",
            Branch::MinimalCurrent => "minimal-current",
            Branch::MaximalCurrent => "maximal-current",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EquilibriumPoint {
    pub x1_bar: f64,
    pub x2_bar: f64,
    /// Integrator component, present for PI loops only.
    pub x3_bar: Option<f64>,
    pub u_bar: f64,
    pub branch: Branch,
}

impl EquilibriumPoint {
    pub fn state(&self) -> ScaledState {
        ScaledState::new(self.x1_bar, self.x2_bar)
    }

    /// `(x1, x2, x3)` for PI loops.
    pub fn chi(&self) -> Option<[f64; 3]> {
        self.x3_bar.map(|x3| [self.x1_bar, self.x2_bar, x3])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Existence {
    pub satisfied: bool,
    /// `1/(4 y*^2) - d1 d2`.
    pub margin: f64,
}

fn check_reference(y_star: f64) -> Result<()> {
    if !(y_star.is_finite() && y_star > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "y* must be finite and > 0, got {y_star}"
        )));
    }
    Ok(())
}

/// Strict test of `d1 d2 < 1/(4 y*^2)`; the boundary counts as non-existence.
pub fn existence_condition(sp: &ScaledParams, y_star: f64) -> Result<Existence> {
    check_reference(y_star)?;
    let margin = 1.0 / (4.0 * y_star * y_star) - sp.d1 * sp.d2;
    Ok(Existence {
        satisfied: margin > 0.0,
        margin,
    })
}

/// Half-width `r = sqrt(1 - 4 d1 d2 y*^2) / 2` of the current branches.
pub fn branch_offset(sp: &ScaledParams, y_star: f64) -> Result<f64> {
    let ex = existence_condition(sp, y_star)?;
    if !ex.satisfied {
        return Err(Error::NoEquilibrium { margin: ex.margin });
    }
    Ok(0.5 * (1.0 - 4.0 * sp.d1 * sp.d2 * y_star * y_star).sqrt())
}

/// Constant control holding `(x1, y*)` at rest.
pub fn equilibrium_control(sp: &ScaledParams, x1_bar: f64, y_star: f64) -> f64 {
    -((sp.d1 - sp.d2) * x1_bar - 1.0) * y_star / (x1_bar * x1_bar + y_star * y_star)
}

pub fn assignable_equilibria(sp: &ScaledParams, y_star: f64) -> Result<Vec<EquilibriumPoint>> {
    sp.validate()?;
    check_reference(y_star)?;
    if sp.d1 == 0.0 {
        return Ok(vec![EquilibriumPoint {
            x1_bar: sp.d2 * y_star * y_star,
            x2_bar: y_star,
            x3_bar: None,
            u_bar: 1.0 / y_star,
            branch: Branch::Unique,
        }]);
    }
    let r = branch_offset(sp, y_star)?;
    // (1/2 - r)/d1 rewritten to avoid cancellation when d1 d2 y*^2 is small.
    let x1_min = sp.d2 * y_star * y_star / (0.5 + r);
    let x1_max = (0.5 + r) / sp.d1;
    Ok([
        (x1_min, Branch::MinimalCurrent),
        (x1_max, Branch::MaximalCurrent),
    ]
    .into_iter()
    .map(|(x1_bar, branch)| EquilibriumPoint {
        x1_bar,
        x2_bar: y_star,
        x3_bar: None,
        u_bar: equilibrium_control(sp, x1_bar, y_star),
        branch,
    })
    .collect())
}

/// Assignable equilibria extended with the PI integrator state that produces
/// their constant control.
pub fn pi_equilibria(
    sp: &ScaledParams,
    y_star: f64,
    gains: &PiGains,
) -> Result<Vec<EquilibriumPoint>> {
    gains.validate()?;
    let base = assignable_equilibria(sp, y_star)?;
    let scale = 1.0 / (gains.ki * y_star);
    let r = if sp.d1 > 0.0 {
        branch_offset(sp, y_star)?
    } else {
        0.0
    };
    Ok(base
        .into_iter()
        .map(|eq| {
            // 1 - d1 x1 equals 1/2 + r (minimal) or 1/2 - r (maximal).
            let supplied = match eq.branch {
                Branch::Unique => 1.0,
                Branch::MinimalCurrent => 0.5 + r,
                Branch::MaximalCurrent => 0.5 - r,
            };
            EquilibriumPoint {
                x3_bar: Some(scale * (supplied - gains.u0 * y_star)),
                ..eq
            }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Surface {
    /// `x1 - d2 x2^2 = 0`, the lossless-inductor case.
    S0,
    /// `x1 - d1 x1^2 - d2 x2^2 = 0`.
    Su,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparatrixResidual {
    pub value: f64,
    pub surface: Surface,
}

impl SeparatrixResidual {
    pub fn above(&self) -> bool {
        self.value > 0.0
    }
}

/// Signed distance-like residual to the separatrix; positive is "above".
pub fn separatrix_residual(
    sp: &ScaledParams,
    x: ScaledState,
    surface: Surface,
) -> SeparatrixResidual {
    let value = match surface {
        Surface::S0 => x.x1 - sp.d2 * x.x2 * x.x2,
        Surface::Su => x.x1 - sp.d1 * x.x1 * x.x1 - sp.d2 * x.x2 * x.x2,
    };
    SeparatrixResidual { value, surface }
}

/// Largest component of the open-loop field at an assignable equilibrium,
/// or of the PI closed-loop field when the integrator state is present.
pub fn equilibrium_residual(
    sp: &ScaledParams,
    y_star: f64,
    gains: Option<&PiGains>,
    eq: &EquilibriumPoint,
) -> f64 {
    match (gains, eq.chi()) {
        (Some(g), Some(chi)) => pi_closed_loop_field(sp, g, y_star, chi)
            .iter()
            .fold(0.0f64, |m, v| m.max(v.abs())),
        _ => {
            let f = vector_field(sp, eq.state(), eq.u_bar);
            f.x1.abs().max(f.x2.abs())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::power_balance;
    use proptest::prelude::*;

    fn sp(d1: f64, d2: f64) -> ScaledParams {
        ScaledParams::new(d1, d2).unwrap()
    }

    fn reference_gains() -> PiGains {
        PiGains::new(2.0, 1.0, 0.5).unwrap()
    }

    #[test]
    fn existence_examples() {
        let ex = existence_condition(&sp(0.25, 0.75), 1.0).unwrap();
        assert!(ex.satisfied);
        assert_eq!(ex.margin, 0.0625);

        let ex = existence_condition(&sp(0.0, 3.0), 0.7).unwrap();
        assert!(ex.satisfied);
        assert!((ex.margin - 1.0 / (4.0 * 0.49)).abs() < 1e-15);

        let ex = existence_condition(&sp(0.25, 1.0), 1.0).unwrap();
        assert!(!ex.satisfied);
        assert_eq!(ex.margin, 0.0);

        assert!(existence_condition(&sp(0.25, 1.0), 0.0).is_err());
        assert!(existence_condition(&sp(0.25, 1.0), -2.0).is_err());
    }

    #[test]
    fn lossless_equilibrium_is_unique() {
        let eqs = assignable_equilibria(&sp(0.0, 1.0), 2.0).unwrap();
        assert_eq!(eqs.len(), 1);
        assert_eq!(eqs[0].state(), ScaledState::new(4.0, 2.0));
        assert_eq!(eqs[0].u_bar, 0.5);
        assert_eq!(eqs[0].branch, Branch::Unique);
    }

    #[test]
    fn lossy_equilibria_pair() {
        let s = sp(0.25, 0.75);
        let eqs = assignable_equilibria(&s, 1.0).unwrap();
        assert_eq!(branch_offset(&s, 1.0).unwrap(), 0.25);
        assert_eq!(eqs[0].branch, Branch::MinimalCurrent);
        assert!((eqs[0].x1_bar - 1.0).abs() < 1e-15);
        assert!((eqs[0].u_bar - 0.75).abs() < 1e-15);
        assert_eq!(eqs[1].branch, Branch::MaximalCurrent);
        assert!((eqs[1].x1_bar - 3.0).abs() < 1e-15);
        assert!((eqs[1].u_bar - 0.25).abs() < 1e-15);
        for eq in &eqs {
            assert!(equilibrium_residual(&s, 1.0, None, eq) < 1e-14);
        }
    }

    #[test]
    fn boundary_is_rejected() {
        match assignable_equilibria(&sp(0.25, 1.0), 1.0) {
            Err(Error::NoEquilibrium { margin }) => assert_eq!(margin, 0.0),
            other => panic!("expected NoEquilibrium, got {other:?}"),
        }
    }

    #[test]
    fn pi_equilibria_of_reference_setups() {
        let g = reference_gains();
        let eqs = pi_equilibria(&sp(0.0, 1.0), 2.0, &g).unwrap();
        assert_eq!(eqs[0].chi().unwrap(), [4.0, 2.0, 0.0]);

        let s = sp(0.25, 0.75);
        let eqs = pi_equilibria(&s, 1.0, &g).unwrap();
        let [a, b, c] = eqs[0].chi().unwrap();
        assert!((a - 1.0).abs() < 1e-15 && b == 1.0 && (c - 0.25).abs() < 1e-15);
        let [a, b, c] = eqs[1].chi().unwrap();
        assert!((a - 3.0).abs() < 1e-15 && b == 1.0 && (c + 0.25).abs() < 1e-15);
        for eq in &eqs {
            assert!(equilibrium_residual(&s, 1.0, Some(&g), eq) < 1e-14);
        }
    }

    #[test]
    fn separatrix_examples() {
        let s = sp(0.0, 1.0);
        let below = separatrix_residual(&s, ScaledState::new(3.9, 2.0), Surface::S0);
        assert!((below.value + 0.1).abs() < 1e-12 && !below.above());
        let above = separatrix_residual(&s, ScaledState::new(4.1, 2.0), Surface::S0);
        assert!((above.value - 0.1).abs() < 1e-12 && above.above());
        let on = separatrix_residual(&sp(0.25, 0.75), ScaledState::new(1.0, 1.0), Surface::Su);
        assert_eq!(on.value, 0.0);
    }

    #[test]
    fn branches_merge_at_the_boundary() {
        let (d1, y) = (0.2, 1.5);
        let d2_crit = 1.0 / (4.0 * d1 * y * y);
        let mut prev_gap = f64::INFINITY;
        for eps in [1e-2, 1e-4, 1e-6, 1e-8, 1e-10] {
            let eqs = assignable_equilibria(&sp(d1, d2_crit * (1.0 - eps)), y).unwrap();
            let gap = eqs[1].x1_bar - eqs[0].x1_bar;
            assert!(gap > 0.0 && gap < prev_gap);
            prev_gap = gap;
            for eq in &eqs {
                assert!((eq.x1_bar - 1.0 / (2.0 * d1)).abs() < 2.0 * eps.sqrt() / d1);
            }
        }
    }

    proptest! {
        #[test]
        fn separatrix_coincides_with_zero_energy_rate(
            d1 in 0.0..2.0f64, d2 in 0.05..5.0f64, x1 in -10.0..10.0f64, x2 in -10.0..10.0f64,
        ) {
            let s = sp(d1, d2);
            let x = ScaledState::new(x1, x2);
            let su = separatrix_residual(&s, x, Surface::Su).value;
            prop_assert!((su - power_balance(&s, x)).abs() < 1e-12 * (1.0 + x1 * x1 + x2 * x2));
            let s0 = sp(0.0, d2);
            let v = separatrix_residual(&s0, x, Surface::S0).value;
            prop_assert!((v - power_balance(&s0, x)).abs() < 1e-12 * (1.0 + x1 * x1 + x2 * x2));
        }

        #[test]
        fn returned_equilibria_are_at_rest(
            d1 in 1e-3..2.0f64, s in 0.0..0.999f64, y in 0.2..5.0f64,
            kp in 0.0..10.0f64, ki in 1e-3..10.0f64, u0 in -2.0..2.0f64,
        ) {
            let d2 = (s / (4.0 * d1 * y * y)).max(1e-9);
            let p = sp(d1, d2);
            let g = PiGains::new(kp, ki, u0).unwrap();
            for eq in pi_equilibria(&p, y, &g).unwrap() {
                prop_assert_eq!(eq.x2_bar, y);
                let scale = 1.0 + eq.x1_bar.abs() + eq.x3_bar.unwrap().abs() * ki;
                prop_assert!(equilibrium_residual(&p, y, Some(&g), &eq) < 1e-10 * scale * scale);
                prop_assert!(equilibrium_residual(&p, y, None, &eq) < 1e-10 * scale);
            }
        }
    }
}
