//! Finite-convergence-time adaptive observer of the inductor current from
//! the measured capacitor voltage.
//!
//! The observer runs a copy `xi` of the plant and its transition matrix
//! `Phi`, so that `x = xi + Phi theta` with the unknown constant
//! `theta = x(0) - xi(0)`. A filtered regressor extension produces a scalar
//! regression `Y_ext = Delta theta` with `Delta = det Omega`; a gradient flow
//! on it, together with the decaying scalar `omega`, recovers `theta` exactly
//! once `omega` drops below `1 - mu`.

use nalgebra::{Matrix2, Vector2};

use crate::error::{Error, Result};
use crate::model::{interconnection_matrix, ScaledParams};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverConfig {
    /// Regressor filter gain.
    pub lambda: f64,
    /// Adaptation gain.
    pub gamma: f64,
    /// Clipping constant of `omega`.
    pub mu: f64,
    pub innovation: InnovationSign,
}

impl Default for ObserverConfig {
    fn default() -> Self {
        Self {
            lambda: 1.0,
            gamma: 1000.0,
            mu: 0.05,
            innovation: InnovationSign::MeasurementMinusCopy,
        }
    }
}

impl ObserverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "lambda must be > 0, got {}",
                self.lambda
            )));
        }
        if !(self.gamma.is_finite() && self.gamma > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "gamma must be > 0, got {}",
                self.gamma
            )));
        }
        if !(self.mu > 0.0 && self.mu < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "mu must lie in (0, 1), got {}",
                self.mu
            )));
        }
        Ok(())
    }

    /// Right-hand side `-(1/gamma) ln(1 - mu)` of the interval excitation test.
    pub fn excitation_threshold(&self) -> f64 {
        -(1.0 - self.mu).ln() / self.gamma
    }
}

/// Sign of the output injection in the `Y` filter.
///
/// With `Y' = -lambda Y + lambda Phi^T C^T (C xi - y)` the extended
/// regression reads `adj(Omega) Y = -Delta theta`, so `theta_hat` converges to
/// `-theta`. [`InnovationSign::MeasurementMinusCopy`] uses `(y - C xi)` and
/// converges to `theta`; it is the default.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InnovationSign {
    CopyMinusMeasurement,
    MeasurementMinusCopy,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverState {
    pub xi: Vector2<f64>,
    pub phi: Matrix2<f64>,
    pub y: Vector2<f64>,
    pub omega_mat: Matrix2<f64>,
    pub omega: f64,
    pub theta_hat: Vector2<f64>,
}

impl ObserverState {
    /// Number of scalars in [`ObserverState::write_to`].
    pub const LEN: usize = 15;

    pub fn initial(xi0: Vector2<f64>, theta0: Vector2<f64>) -> Self {
        Self {
            xi: xi0,
            phi: Matrix2::identity(),
            y: Vector2::zeros(),
            omega_mat: Matrix2::zeros(),
            omega: 1.0,
            theta_hat: theta0,
        }
    }

    /// Packs as `xi(2), Phi(4, row-major), Y(2), Omega(4, row-major), omega,
    /// theta_hat(2)`.
    pub fn write_to(&self, out: &mut [f64]) {
        out[0] = self.xi[0];
        out[1] = self.xi[1];
        out[2] = self.phi[(0, 0)];
        out[3] = self.phi[(0, 1)];
        out[4] = self.phi[(1, 0)];
        out[5] = self.phi[(1, 1)];
        out[6] = self.y[0];
        out[7] = self.y[1];
        out[8] = self.omega_mat[(0, 0)];
        out[9] = self.omega_mat[(0, 1)];
        out[10] = self.omega_mat[(1, 0)];
        out[11] = self.omega_mat[(1, 1)];
        out[12] = self.omega;
        out[13] = self.theta_hat[0];
        out[14] = self.theta_hat[1];
    }

    pub fn read_from(s: &[f64]) -> Result<Self> {
        if s.len() < Self::LEN {
            return Err(Error::State(format!(
                "observer block needs {} entries, got {}",
                Self::LEN,
                s.len()
            )));
        }
        Ok(Self {
            xi: Vector2::new(s[0], s[1]),
            phi: Matrix2::new(s[2], s[3], s[4], s[5]),
            y: Vector2::new(s[6], s[7]),
            omega_mat: Matrix2::new(s[8], s[9], s[10], s[11]),
            omega: s[12],
            theta_hat: Vector2::new(s[13], s[14]),
        })
    }

    /// `Delta = det Omega`.
    pub fn delta(&self) -> f64 {
        self.omega_mat.determinant()
    }

    /// `adj(Omega) Y`.
    pub fn extended_output(&self) -> Vector2<f64> {
        adjugate(&self.omega_mat) * self.y
    }
}

pub fn adjugate(m: &Matrix2<f64>) -> Matrix2<f64> {
    Matrix2::new(m[(1, 1)], -m[(0, 1)], -m[(1, 0)], m[(0, 0)])
}

/// Time derivative of every observer block, laid out like the state.
pub fn observer_derivative(
    cfg: &ObserverConfig,
    sp: &ScaledParams,
    os: &ObserverState,
    u: f64,
    y_meas: f64,
) -> ObserverState {
    let f = interconnection_matrix(sp, u);
    let lambda = cfg.lambda;
    // C = [0 1], so Phi^T C^T is the second row of Phi.
    let c_phi = Vector2::new(os.phi[(1, 0)], os.phi[(1, 1)]);
    let innovation = match cfg.innovation {
        InnovationSign::CopyMinusMeasurement => os.xi[1] - y_meas,
        InnovationSign::MeasurementMinusCopy => y_meas - os.xi[1],
    };
    let delta = os.delta();
    ObserverState {
        xi: f * os.xi + Vector2::new(1.0, 0.0),
        phi: f * os.phi,
        y: -lambda * os.y + lambda * innovation * c_phi,
        omega_mat: -lambda * os.omega_mat + lambda * c_phi * c_phi.transpose(),
        omega: -cfg.gamma * delta * delta * os.omega,
        theta_hat: cfg.gamma * delta * (os.extended_output() - delta * os.theta_hat),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FctEstimate {
    pub x_hat: Vector2<f64>,
    pub theta_fct: Vector2<f64>,
    pub omega_c: f64,
}

/// State estimate `xi + Phi theta_FCT` with
/// `theta_FCT = (theta_hat - omega_c theta_hat(0)) / (1 - omega_c)`.
pub fn fct_estimate(
    cfg: &ObserverConfig,
    os: &ObserverState,
    theta0: &Vector2<f64>,
) -> FctEstimate {
    let omega_c = if os.omega <= 1.0 - cfg.mu {
        os.omega
    } else {
        1.0 - cfg.mu
    };
    let theta_fct = (os.theta_hat - omega_c * theta0) / (1.0 - omega_c);
    FctEstimate {
        x_hat: os.xi + os.phi * theta_fct,
        theta_fct,
        omega_c,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExcitationReport {
    pub satisfied: bool,
    pub t_c: Option<f64>,
    /// Final value of the running integral of `Delta^2`.
    pub energy: f64,
    pub threshold: f64,
}

/// First time the running integral of `Delta^2` (sampled alongside a
/// simulation) reaches the excitation threshold, linearly interpolated
/// between samples.
pub fn excitation_monitor(
    cfg: &ObserverConfig,
    times: &[f64],
    running_integral: &[f64],
) -> ExcitationReport {
    let threshold = cfg.excitation_threshold();
    let mut t_c = None;
    for i in 0..times.len().min(running_integral.len()) {
        if running_integral[i] >= threshold {
            t_c = Some(if i == 0 {
                times[0]
            } else {
                let (a, b) = (running_integral[i - 1], running_integral[i]);
                let s = if b > a {
                    (threshold - a) / (b - a)
                } else {
                    1.0
                };
                times[i - 1] + s * (times[i] - times[i - 1])
            });
            break;
        }
    }
    ExcitationReport {
        satisfied: t_c.is_some(),
        t_c,
        energy: running_integral.last().copied().unwrap_or(0.0),
        threshold,
    }
}

/// Same as [`excitation_monitor`] from raw `Delta` samples, integrating
/// `Delta^2` with the trapezoidal rule.
pub fn excitation_monitor_from_delta(
    cfg: &ObserverConfig,
    times: &[f64],
    deltas: &[f64],
) -> ExcitationReport {
    let mut integral = Vec::with_capacity(times.len());
    let mut acc = 0.0;
    for i in 0..times.len().min(deltas.len()) {
        if i > 0 {
            let h = times[i] - times[i - 1];
            acc += 0.5 * h * (deltas[i - 1].powi(2) + deltas[i].powi(2));
        }
        integral.push(acc);
    }
    excitation_monitor(cfg, times, &integral)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn cfg() -> ObserverConfig {
        ObserverConfig::default()
    }

    #[test]
    fn zero_gram_at_start_freezes_adaptation() {
        let sp = ScaledParams::new(0.0, 1.0).unwrap();
        let os = ObserverState::initial(Vector2::zeros(), Vector2::zeros());
        for (u, y) in [(0.3, 1.0), (-2.0, 5.0)] {
            let d = observer_derivative(&cfg(), &sp, &os, u, y);
            assert_eq!(d.theta_hat, Vector2::zeros());
            assert_eq!(d.omega, 0.0);
            assert_eq!(d.xi, Vector2::new(1.0, 0.0));
            assert_eq!(d.phi, interconnection_matrix(&sp, u));
        }
    }

    #[test]
    fn identity_gram_reduces_to_plain_gradient() {
        let sp = ScaledParams::new(0.1, 1.0).unwrap();
        let mut os = ObserverState::initial(Vector2::zeros(), Vector2::zeros());
        os.omega_mat = Matrix2::identity();
        os.y = Vector2::new(0.7, -1.2);
        os.theta_hat = Vector2::new(0.2, 0.5);
        let c = cfg();
        let d = observer_derivative(&c, &sp, &os, 0.5, 1.0);
        assert_eq!(os.extended_output(), os.y);
        let expected = c.gamma * (os.y - os.theta_hat);
        assert!((d.theta_hat - expected).norm() < 1e-15);
        assert!((d.omega + c.gamma * os.omega).abs() < 1e-15);
    }

    #[test]
    fn fct_estimate_is_identity_when_unadapted() {
        let mut os = ObserverState::initial(Vector2::new(0.3, 0.4), Vector2::new(1.5, -2.0));
        let theta0 = os.theta_hat;
        for omega in [1.0, 0.97, 0.5, 0.01] {
            os.omega = omega;
            let est = fct_estimate(&cfg(), &os, &theta0);
            assert!((est.theta_fct - theta0).norm() < 1e-14);
            assert!(est.omega_c <= 0.95);
        }
    }

    #[test]
    fn fct_recovers_parameter_from_gradient_flow_solution() {
        // theta_hat(t) = (1 - omega) theta + omega theta_hat(0) solves the
        // gradient flow when Y_ext = Delta theta.
        let theta = Vector2::new(0.8, -0.35);
        let theta0 = Vector2::new(-1.0, 2.0);
        for omega in [0.95, 0.6, 1e-3] {
            let mut os = ObserverState::initial(Vector2::zeros(), theta0);
            os.omega = omega;
            os.theta_hat = (1.0 - omega) * theta + omega * theta0;
            let est = fct_estimate(&cfg(), &os, &theta0);
            assert!((est.theta_fct - theta).norm() < 1e-13);
        }
    }

    #[test]
    fn monitor_examples() {
        let c = ObserverConfig {
            gamma: 1.0,
            mu: 1.0 - (-1.0f64).exp(),
            ..cfg()
        };
        assert!((c.excitation_threshold() - 1.0).abs() < 1e-15);
        let times: Vec<f64> = (0..=300).map(|i| i as f64 * 0.01).collect();
        let ones = vec![1.0; times.len()];
        let rep = excitation_monitor_from_delta(&c, &times, &ones);
        assert!(rep.satisfied);
        assert!((rep.t_c.unwrap() - 1.0).abs() < 1e-12);

        let zeros = vec![0.0; times.len()];
        let rep = excitation_monitor_from_delta(&c, &times, &zeros);
        assert!(!rep.satisfied && rep.t_c.is_none());
    }

    #[test]
    fn state_packing_round_trip() {
        let mut buf = [0.0; ObserverState::LEN];
        let os = ObserverState {
            xi: Vector2::new(1.0, 2.0),
            phi: Matrix2::new(3.0, 4.0, 5.0, 6.0),
            y: Vector2::new(7.0, 8.0),
            omega_mat: Matrix2::new(9.0, 10.0, 11.0, 12.0),
            omega: 13.0,
            theta_hat: Vector2::new(14.0, 15.0),
        };
        os.write_to(&mut buf);
        assert_eq!(buf.to_vec(), (1..=15).map(f64::from).collect::<Vec<_>>());
        assert_eq!(ObserverState::read_from(&buf).unwrap(), os);
        assert!(ObserverState::read_from(&buf[..10]).is_err());
    }

    #[test]
    fn config_domain() {
        assert!(cfg().validate().is_ok());
        assert!(ObserverConfig { mu: 1.0, ..cfg() }.validate().is_err());
        assert!(ObserverConfig {
            lambda: 0.0,
            ..cfg()
        }
        .validate()
        .is_err());
        assert!(ObserverConfig {
            gamma: -1.0,
            ..cfg()
        }
        .validate()
        .is_err());
    }

    proptest! {
        #[test]
        fn monitor_agrees_with_closed_form_omega(
            gamma in 0.1..20.0f64, mu in 0.01..0.9f64,
            amps in proptest::collection::vec(0.0..1.5f64, 50),
        ) {
            let c = ObserverConfig { gamma, mu, ..cfg() };
            let times: Vec<f64> = (0..amps.len()).map(|i| i as f64 * 0.1).collect();
            let rep = excitation_monitor_from_delta(&c, &times, &amps);
            let omega_end = (-gamma * rep.energy).exp();
            prop_assert_eq!(rep.satisfied, omega_end <= 1.0 - mu + 1e-12 && rep.energy >= rep.threshold);
        }
    }
}
