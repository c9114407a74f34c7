//! Voltage-feedback control laws as pure maps from measurements (and
//! controller state) to duty cycle. Integrator states are owned by the
//! closed-loop state vector in [`crate::sim`].

use crate::error::{Error, Result};
use crate::model::ScaledParams;

/// Gains of `u = u0 + K_I x_c + K_P (y* - x2)`, `x_c' = y* - x2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiGains {
    pub kp: f64,
    pub ki: f64,
    pub u0: f64,
}

impl PiGains {
    pub fn new(kp: f64, ki: f64, u0: f64) -> Result<Self> {
        let g = Self { kp, ki, u0 };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.kp.is_finite() && self.kp >= 0.0) {
            return Err(Error::ParameterDomain(format!(
                "K_P must be >= 0, got {}",
                self.kp
            )));
        }
        if !(self.ki.is_finite() && self.ki > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "K_I must be > 0, got {}",
                self.ki
            )));
        }
        if !self.u0.is_finite() {
            return Err(Error::ParameterDomain(format!(
                "u0 must be finite, got {}",
                self.u0
            )));
        }
        Ok(())
    }
}

/// Duty cycle and integrator derivative of a dynamic controller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DynamicOutput {
    pub u: f64,
    pub xc_dot: f64,
}

pub fn pi_control(g: &PiGains, y_star: f64, x2: f64, xc: f64) -> DynamicOutput {
    let err = y_star - x2;
    DynamicOutput {
        u: g.u0 + g.ki * xc + g.kp * err,
        xc_dot: err,
    }
}

/// Plant in closed loop with the PI law, state `chi = (x1, x2, x_c)`.
pub fn pi_closed_loop_field(
    sp: &ScaledParams,
    g: &PiGains,
    y_star: f64,
    chi: [f64; 3],
) -> [f64; 3] {
    let [x1, x2, xc] = chi;
    let out = pi_control(g, y_star, x2, xc);
    [
        -sp.d1 * x1 + 1.0 - x2 * out.u,
        -sp.d2 * x2 + x1 * out.u,
        out.xc_dot,
    ]
}

/// Static law `u = (1/y*) (x2/y*)^alpha`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdaAlpha {
    pub alpha: f64,
}

impl IdaAlpha {
    pub fn new(alpha: f64) -> Result<Self> {
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(Error::ParameterDomain(format!(
                "alpha must lie in (0, 1), got {alpha}"
            )));
        }
        Ok(Self { alpha })
    }
}

pub fn ida_alpha_control(law: &IdaAlpha, y_star: f64, x2: f64) -> Result<f64> {
    if !(x2 > 0.0) {
        return Err(Error::ControlDomain(format!(
            "power law needs a positive voltage, got x2 = {x2}"
        )));
    }
    Ok((x2 / y_star).powf(law.alpha) / y_star)
}

/// Static law `u = k x2 / (x2^2 + (k - 1) y*^2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IdaK {
    pub k: f64,
}

impl IdaK {
    pub fn new(k: f64) -> Result<Self> {
        if !(k.is_finite() && k > 3.0) {
            return Err(Error::ParameterDomain(format!("k must be > 3, got {k}")));
        }
        Ok(Self { k })
    }
}

pub fn ida_k_control(law: &IdaK, y_star: f64, x2: f64) -> f64 {
    law.k * x2 / (x2 * x2 + (law.k - 1.0) * y_star * y_star)
}

/// How the constant part of the duty cycle is produced in the PID-PBC.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PidPbcMode {
    /// `u = -K_P y_PI - K_I x_c`; the integrator settles at
    /// `x_c = -u_bar / K_I` to supply the bias.
    Literal,
    /// `u = u_bar - K_P y_PI - K_I x_c`; the integrator settles at zero.
    Feedforward,
}

/// PID-PBC around the shifted passive output `y_PI = x1* x2 - y* x1_hat`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidPbc {
    pub kp: f64,
    pub ki: f64,
    /// Current reference `x1*` paired with `y*`.
    pub x1_star: f64,
    pub mode: PidPbcMode,
    /// Equilibrium duty cycle used by [`PidPbcMode::Feedforward`].
    pub u_bar: f64,
}

impl PidPbc {
    /// Tuned for the lossless equilibrium `(d2 y*^2, y*)` with `u_bar = 1/y*`.
    pub fn new(sp: &ScaledParams, y_star: f64, kp: f64, ki: f64, mode: PidPbcMode) -> Result<Self> {
        Self::with_reference(kp, ki, sp.d2 * y_star * y_star, 1.0 / y_star, mode)
    }

    pub fn with_reference(
        kp: f64,
        ki: f64,
        x1_star: f64,
        u_bar: f64,
        mode: PidPbcMode,
    ) -> Result<Self> {
        if !(kp.is_finite() && kp > 0.0 && ki.is_finite() && ki > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "PID-PBC gains must be > 0, got K_P = {kp}, K_I = {ki}"
            )));
        }
        if !x1_star.is_finite() || !u_bar.is_finite() {
            return Err(Error::ParameterDomain(
                "PID-PBC reference must be finite".into(),
            ));
        }
        Ok(Self {
            kp,
            ki,
            x1_star,
            mode,
            u_bar,
        })
    }

    /// Integrator value at the closed-loop equilibrium.
    pub fn equilibrium_integrator(&self) -> f64 {
        match self.mode {
            PidPbcMode::Literal => -self.u_bar / self.ki,
            PidPbcMode::Feedforward => 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PidPbcOutput {
    pub u: f64,
    pub y_pi: f64,
    pub xc_dot: f64,
}

pub fn passive_output(x1_star: f64, y_star: f64, x2: f64, x1_hat: f64) -> f64 {
    x1_star * x2 - y_star * x1_hat
}

pub fn pid_pbc_control(law: &PidPbc, y_star: f64, x2: f64, x1_hat: f64, xc: f64) -> PidPbcOutput {
    let y_pi = passive_output(law.x1_star, y_star, x2, x1_hat);
    let bias = match law.mode {
        PidPbcMode::Literal => 0.0,
        PidPbcMode::Feedforward => law.u_bar,
    };
    PidPbcOutput {
        u: bias - law.kp * y_pi - law.ki * xc,
        y_pi,
        xc_dot: y_pi,
    }
}
