//! Physical and scaled boost converter models.
//!
//! The physical average model
//!
//! ```text
//! L di/dt = -R i - v u + E
//! C dv/dt = -G v + i u
//! ```
//!
//! is mapped to the scaled model by `x1 = sqrt(L/C) i / E`, `x2 = v / E` and
//! `tau = t / sqrt(L C)`, which leaves two dimensionless parameters
//! `d1 = R sqrt(C/L)` and `d2 = G sqrt(L/C)`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};

/// Circuit constants in SI units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhysicalParams {
    /// Inductance (H).
    pub l: f64,
    /// Capacitance (F).
    pub c: f64,
    /// Inductor series resistance (Ohm).
    pub r: f64,
    /// Load conductance (S).
    pub g: f64,
    /// Source voltage (V).
    pub e: f64,
}

impl PhysicalParams {
    pub fn new(l: f64, c: f64, r: f64, g: f64, e: f64) -> Result<Self> {
        let p = Self { l, c, r, g, e };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("L", self.l),
            ("C", self.c),
            ("R", self.r),
            ("G", self.g),
            ("E", self.e),
        ];
        for (name, v) in fields {
            if !v.is_finite() {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        for (name, v) in [("L", self.l), ("C", self.c), ("G", self.g), ("E", self.e)] {
            if v <= 0.0 {
                return Err(Error::ParameterDomain(format!(
                    "{name} must be > 0, got {v}"
                )));
            }
        }
        if self.r < 0.0 {
            return Err(Error::ParameterDomain(format!(
                "R must be >= 0, got {}",
                self.r
            )));
        }
        Ok(())
    }

    /// Characteristic impedance `sqrt(L/C)`.
    pub fn impedance(&self) -> f64 {
        (self.l / self.c).sqrt()
    }

    /// Time unit `sqrt(L C)` of the scaled model, in seconds.
    pub fn time_unit(&self) -> f64 {
        (self.l * self.c).sqrt()
    }

    /// Maps `(i_L, v_C)` to scaled coordinates.
    pub fn scale_state(&self, i_l: f64, v_c: f64) -> ScaledState {
        ScaledState::new(self.impedance() * i_l / self.e, v_c / self.e)
    }

    /// Maps scaled coordinates back to `(i_L, v_C)`.
    pub fn unscale_state(&self, x: ScaledState) -> (f64, f64) {
        (x.x1 * self.e / self.impedance(), x.x2 * self.e)
    }

    pub fn scale_time(&self, t: f64) -> f64 {
        t / self.time_unit()
    }

    pub fn unscale_time(&self, tau: f64) -> f64 {
        tau * self.time_unit()
    }

    /// Scaled voltage reference for a desired capacitor voltage in volts.
    pub fn scale_voltage(&self, v: f64) -> f64 {
        v / self.e
    }

    /// Existence margin of the assignable equilibria in original
    /// coordinates, `E^2 / (4 v*^2) - R G`. Positive iff equilibria exist.
    pub fn existence_margin(&self, v_ref: f64) -> f64 {
        self.e * self.e / (4.0 * v_ref * v_ref) - self.r * self.g
    }
}

/// Dimensionless damping `d1` and load `d2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaledParams {
    pub d1: f64,
    pub d2: f64,
}

impl ScaledParams {
    pub fn new(d1: f64, d2: f64) -> Result<Self> {
        let sp = Self { d1, d2 };
        sp.validate()?;
        Ok(sp)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.d1.is_finite() || self.d1 < 0.0 {
            return Err(Error::ParameterDomain(format!(
                "d1 must be finite and >= 0, got {}",
                self.d1
            )));
        }
        if !self.d2.is_finite() || self.d2 <= 0.0 {
            return Err(Error::ParameterDomain(format!(
                "d2 must be finite and > 0, got {}",
                self.d2
            )));
        }
        Ok(())
    }

    /// Rebuilds physical constants from the scaled ones, given the reactive
    /// elements and the source voltage which the scaling eliminates.
    pub fn to_physical(&self, l: f64, c: f64, e: f64) -> Result<PhysicalParams> {
        let z = (l / c).sqrt();
        PhysicalParams::new(l, c, self.d1 * z, self.d2 / z, e)
    }
}

/// Scaled parameters `(R sqrt(C/L), G sqrt(L/C))`.
pub fn to_scaled(p: &PhysicalParams) -> Result<ScaledParams> {
    p.validate()?;
    let z = p.impedance();
    ScaledParams::new(p.r / z, p.g * z)
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ScaledState {
    pub x1: f64,
    pub x2: f64,
}

impl ScaledState {
    pub const fn new(x1: f64, x2: f64) -> Self {
        Self { x1, x2 }
    }

    pub fn to_vector(self) -> Vector2<f64> {
        Vector2::new(self.x1, self.x2)
    }

    pub fn from_vector(v: &Vector2<f64>) -> Self {
        Self::new(v[0], v[1])
    }

    pub fn norm(self) -> f64 {
        self.x1.hypot(self.x2)
    }

    pub fn dot(self, other: Self) -> f64 {
        self.x1 * other.x1 + self.x2 * other.x2
    }
}

/// Open-loop drift and input fields at `x` for control `u`.
pub fn vector_field(sp: &ScaledParams, x: ScaledState, u: f64) -> ScaledState {
    ScaledState::new(-sp.d1 * x.x1 + 1.0 - x.x2 * u, -sp.d2 * x.x2 + x.x1 * u)
}

/// Stored energy `H(x) = |x|^2 / 2`.
pub fn energy(x: ScaledState) -> f64 {
    0.5 * (x.x1 * x.x1 + x.x2 * x.x2)
}

/// `dH/dtau` along any trajectory: dissipated plus supplied power. The
/// control does not appear.
pub fn power_balance(sp: &ScaledParams, x: ScaledState) -> f64 {
    -sp.d1 * x.x1 * x.x1 - sp.d2 * x.x2 * x.x2 + x.x1
}

/// Port-Hamiltonian form `x' = F(u) grad H(x) + (1, 0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PhRepresentation {
    pub params: ScaledParams,
}

impl PhRepresentation {
    pub fn new(params: ScaledParams) -> Self {
        Self { params }
    }

    /// Interconnection and damping matrix `[[-d1, -u], [u, -d2]]`.
    pub fn interconnection(&self, u: f64) -> Matrix2<f64> {
        interconnection_matrix(&self.params, u)
    }

    pub fn gradient(&self, x: ScaledState) -> Vector2<f64> {
        x.to_vector()
    }

    pub fn input(&self) -> Vector2<f64> {
        Vector2::new(1.0, 0.0)
    }

    pub fn field(&self, x: ScaledState, u: f64) -> ScaledState {
        ScaledState::from_vector(&(self.interconnection(u) * self.gradient(x) + self.input()))
    }
}

pub fn interconnection_matrix(sp: &ScaledParams, u: f64) -> Matrix2<f64> {
    Matrix2::new(-sp.d1, -u, u, -sp.d2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn unit_parameters_scale_to_identity() {
        let p = PhysicalParams::new(1.0, 1.0, 0.0, 1.0, 1.0).unwrap();
        let sp = to_scaled(&p).unwrap();
        assert_eq!(sp, ScaledParams { d1: 0.0, d2: 1.0 });
        assert_eq!(p.scale_state(2.5, -1.5), ScaledState::new(2.5, -1.5));
        assert_eq!(p.scale_time(3.0), 3.0);
    }

    #[test]
    fn scaling_matches_hand_evaluation() {
        let p = PhysicalParams::new(1.0, 4.0, 0.125, 0.375, 1.0).unwrap();
        let sp = to_scaled(&p).unwrap();
        assert!(close(sp.d1, 0.25, 1e-15));
        assert!(close(sp.d2, 0.1875, 1e-15));
        // Second route: d1 is R over the characteristic impedance, d2 is the
        // load conductance times it; their product R*G is scale free.
        assert!(close(sp.d1 * sp.d2, p.r * p.g, 1e-15));
        assert!(close(sp.d2 / sp.d1, p.g * p.l / (p.r * p.c), 1e-15));
    }

    #[test]
    fn zero_resistance_gives_zero_damping() {
        for (l, c) in [(1e-3, 2e-6), (5.0, 0.1), (0.3, 7.0)] {
            let p = PhysicalParams::new(l, c, 0.0, 0.2, 12.0).unwrap();
            assert_eq!(to_scaled(&p).unwrap().d1, 0.0);
        }
    }

    #[test]
    fn invalid_physical_parameters_are_rejected() {
        assert!(PhysicalParams::new(0.0, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, -1.0, 0.0, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, -0.1, 1.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 0.0, 0.0, 1.0).is_err());
        assert!(PhysicalParams::new(1.0, 1.0, 0.0, 1.0, f64::NAN).is_err());
        assert!(PhysicalParams::new(f64::INFINITY, 1.0, 0.0, 1.0, 1.0).is_err());
        assert!(ScaledParams::new(-1e-3, 1.0).is_err());
        assert!(ScaledParams::new(0.0, 0.0).is_err());
    }

    #[test]
    fn vector_field_examples() {
        let sp = ScaledParams::new(0.0, 1.0).unwrap();
        assert_eq!(
            vector_field(&sp, ScaledState::new(4.0, 2.0), 0.5),
            ScaledState::new(0.0, 0.0)
        );
        assert_eq!(
            vector_field(&sp, ScaledState::default(), 17.0),
            ScaledState::new(1.0, 0.0)
        );
        let sp = ScaledParams::new(0.25, 0.75).unwrap();
        assert_eq!(
            vector_field(&sp, ScaledState::new(1.0, 1.0), 0.75),
            ScaledState::new(0.0, 0.0)
        );
    }

    #[test]
    fn power_balance_examples() {
        let sp = ScaledParams::new(0.25, 0.75).unwrap();
        assert_eq!(power_balance(&sp, ScaledState::new(1.0, 1.0)), 0.0);
        assert_eq!(power_balance(&sp, ScaledState::new(3.0, 1.0)), 0.0);
        assert_eq!(power_balance(&sp, ScaledState::default()), 0.0);
    }

    #[test]
    fn margin_in_physical_units() {
        let p = PhysicalParams::new(1.0, 1.0, 0.25, 0.75, 1.0).unwrap();
        assert!(close(p.existence_margin(1.0), 0.0625, 1e-15));
    }

    proptest! {
        #[test]
        fn energy_rate_equals_power_balance(
            d1 in 0.0..3.0f64, d2 in 0.01..5.0f64,
            x1 in -10.0..10.0f64, x2 in -10.0..10.0f64, u in -10.0..10.0f64,
        ) {
            let sp = ScaledParams::new(d1, d2).unwrap();
            let x = ScaledState::new(x1, x2);
            let rate = x.dot(vector_field(&sp, x, u));
            prop_assert!((rate - power_balance(&sp, x)).abs() <= 1e-12 * (1.0 + x.dot(x) * (1.0 + u.abs())));
        }

        #[test]
        fn ph_form_matches_vector_field(
            d1 in 0.0..3.0f64, d2 in 0.01..5.0f64,
            x1 in -10.0..10.0f64, x2 in -10.0..10.0f64, u in -10.0..10.0f64,
        ) {
            let sp = ScaledParams::new(d1, d2).unwrap();
            let ph = PhRepresentation::new(sp);
            let x = ScaledState::new(x1, x2);
            let a = ph.field(x, u);
            let b = vector_field(&sp, x, u);
            prop_assert!((a.x1 - b.x1).abs() < 1e-12 && (a.x2 - b.x2).abs() < 1e-12);
            let f = ph.interconnection(u);
            let sym = f + f.transpose();
            prop_assert_eq!(sym, Matrix2::new(-2.0 * d1, 0.0, 0.0, -2.0 * d2));
            let skew = 0.5 * (f - f.transpose());
            let v = x.to_vector();
            prop_assert!((v.dot(&(skew * v))).abs() < 1e-12);
        }

        #[test]
        fn scaling_round_trip(
            l in 1e-6..10.0f64, c in 1e-6..10.0f64, r in 0.0..5.0f64,
            g in 1e-3..5.0f64, e in 0.1..500.0f64,
            i in -50.0..50.0f64, v in -500.0..500.0f64, t in 0.0..1.0f64,
        ) {
            let p = PhysicalParams::new(l, c, r, g, e).unwrap();
            let sp = to_scaled(&p).unwrap();
            let back = sp.to_physical(l, c, e).unwrap();
            prop_assert!((back.r - r).abs() <= 1e-12 * (1.0 + r));
            prop_assert!((back.g - g).abs() <= 1e-12 * (1.0 + g));
            let (i2, v2) = p.unscale_state(p.scale_state(i, v));
            prop_assert!((i2 - i).abs() <= 1e-12 * (1.0 + i.abs()));
            prop_assert!((v2 - v).abs() <= 1e-12 * (1.0 + v.abs()));
            prop_assert!((p.unscale_time(p.scale_time(t)) - t).abs() <= 1e-12 * (1.0 + t));
        }
    }
}
