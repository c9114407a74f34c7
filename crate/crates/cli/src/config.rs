//! Experiment description read from JSON.
//!
//! A config names the plant (scaled or physical, never both), the voltage
//! reference, an optional controller and a list of runs. Initial conditions
//! are always in scaled coordinates.

use boostlab_core::controllers::{IdaAlpha, IdaK, PiGains, PidPbc, PidPbcMode};
use boostlab_core::equilibria::{assignable_equilibria, Branch};
use boostlab_core::model::to_scaled;
use boostlab_core::observer::{InnovationSign, ObserverConfig};
use boostlab_core::sim::{ClosedLoopSystem, Controller, ObserverBlock, SolverOptions};
use boostlab_core::{PhysicalParams, ScaledParams};
use nalgebra::{Matrix2, Matrix3, Vector2};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub params: PlantConfig,
    /// Scaled voltage reference.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub y_star: Option<f64>,
    /// Voltage reference in volts; needs physical parameters.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v_ref: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub controller: Option<ControllerConfig>,
    #[serde(default)]
    pub integrator: IntegratorConfig,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub runs: Vec<RunConfig>,
    /// Grid of extra phase-plane trajectories for static laws.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phase_grid: Option<GridConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub doa: Option<DoaConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<String>,
    /// Saturate the duty cycle to [0, 1]; outcomes are then tagged clamped.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub clamp: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PlantConfig {
    Scaled {
        d1: f64,
        d2: f64,
    },
    Physical {
        l: f64,
        c: f64,
        r: f64,
        g: f64,
        e: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ControllerConfig {
    Pi {
        kp: f64,
        ki: f64,
        u0: f64,
    },
    IdaAlpha {
        alpha: f64,
    },
    IdaK {
        k: f64,
    },
    PidPbc {
        kp: f64,
        ki: f64,
        #[serde(default)]
        mode: ModeConfig,
        #[serde(default)]
        reference: ReferenceConfig,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        observer: Option<ObserverSettings>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ModeConfig {
    #[default]
    Feedforward,
    Literal,
}

/// Current reference of the PID-PBC.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReferenceConfig {
    /// `(d2 y*^2, y*)` with duty cycle `1/y*`.
    #[default]
    Lossless,
    /// Minimal-current assignable equilibrium (needs `d1 > 0`).
    MinimalCurrent,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSettings {
    pub lambda: f64,
    pub gamma: f64,
    pub mu: f64,
    #[serde(default)]
    pub innovation: InnovationConfig,
    #[serde(default)]
    pub theta0: [f64; 2],
    #[serde(default)]
    pub xi0: [f64; 2],
}

impl Default for ObserverSettings {
    fn default() -> Self {
        let d = ObserverConfig::default();
        Self {
            lambda: d.lambda,
            gamma: d.gamma,
            mu: d.mu,
            innovation: InnovationConfig::default(),
            theta0: [0.0; 2],
            xi0: [0.0; 2],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InnovationConfig {
    #[default]
    MeasurementMinusCopy,
    CopyMinusMeasurement,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case", deny_unknown_fields)]
pub enum IntegratorConfig {
    Rk4 { h: f64 },
    Rk45 { rtol: f64, atol: f64 },
    Rosenbrock { rtol: f64, atol: f64 },
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        IntegratorConfig::Rk45 {
            rtol: 1e-8,
            atol: 1e-8,
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<(), String> {
        let ok = match *self {
            IntegratorConfig::Rk4 { h } => h.is_finite() && h > 0.0,
            IntegratorConfig::Rk45 { rtol, atol } | IntegratorConfig::Rosenbrock { rtol, atol } => {
                rtol.is_finite() && rtol > 0.0 && atol.is_finite() && atol > 0.0
            }
        };
        if ok {
            Ok(())
        } else {
            Err(format!(
                "integrator settings must be finite and positive: {self:?}"
            ))
        }
    }

    pub fn options(&self) -> SolverOptions {
        match *self {
            IntegratorConfig::Rk4 { h } => SolverOptions::rk4(h),
            IntegratorConfig::Rk45 { rtol, atol } => SolverOptions::rk45(rtol, atol),
            IntegratorConfig::Rosenbrock { rtol, atol } => SolverOptions::rosenbrock(rtol, atol),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// `(x1, x2)` or `(x1, x2, x_c)`; a missing integrator state starts at 0.
    pub x0: Vec<f64>,
    pub t_end: f64,
    /// Overrides the experiment integrator for this run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub integrator: Option<IntegratorConfig>,
    /// Keep every `stride`-th sample in the written artifacts.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stride: Option<usize>,
    /// Accepted-step budget; the run halts with a failure when it is spent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_steps: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub x1: [f64; 2],
    pub x2: [f64; 2],
    pub n1: usize,
    pub n2: usize,
    pub t_end: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DoaConfig {
    /// Lyapunov weight `Q = q_scale I`.
    #[serde(default = "one")]
    pub q_scale: f64,
    #[serde(default = "default_samples")]
    pub samples: usize,
    /// Boundary points simulated to cross-check the estimate.
    #[serde(default = "default_checks")]
    pub checks: usize,
    #[serde(default = "default_check_end")]
    pub t_end: f64,
}

fn one() -> f64 {
    1.0
}
fn default_samples() -> usize {
    4096
}
fn default_checks() -> usize {
    64
}
fn default_check_end() -> f64 {
    300.0
}

impl Default for DoaConfig {
    fn default() -> Self {
        Self {
            q_scale: 1.0,
            samples: default_samples(),
            checks: default_checks(),
            t_end: default_check_end(),
        }
    }
}

/// Config with every derived quantity built and checked.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub name: String,
    pub scaled: ScaledParams,
    pub physical: Option<PhysicalParams>,
    pub y_star: f64,
    pub v_ref: Option<f64>,
    pub system: Option<ClosedLoopSystem>,
    pub xi0: Vector2<f64>,
}

impl Resolved {
    pub fn system(&self) -> Result<&ClosedLoopSystem, CliError> {
        self.system
            .as_ref()
            .ok_or_else(|| CliError::Config(format!("{}: no controller configured", self.name)))
    }

    pub fn q3(&self, doa: &DoaConfig) -> Matrix3<f64> {
        Matrix3::identity() * doa.q_scale
    }

    pub fn q2(&self, doa: &DoaConfig) -> Matrix2<f64> {
        Matrix2::identity() * doa.q_scale
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text)
            .map_err(|e| CliError::Config(format!("config parse error: {e}")))?;
        cfg.resolve()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serialises")
    }

    pub fn resolve(&self) -> Result<Resolved, CliError> {
        let err = |m: String| CliError::Config(format!("{}: {m}", self.name));
        let core = |e: boostlab_core::Error| err(e.to_string());

        let (scaled, physical) = match self.params {
            PlantConfig::Scaled { d1, d2 } => (ScaledParams::new(d1, d2).map_err(core)?, None),
            PlantConfig::Physical { l, c, r, g, e } => {
                let p = PhysicalParams::new(l, c, r, g, e).map_err(core)?;
                (to_scaled(&p).map_err(core)?, Some(p))
            }
        };
        let y_star = match (self.y_star, self.v_ref, physical) {
            (Some(y), None, _) => y,
            (None, Some(v), Some(p)) => {
                if !(v.is_finite() && v > 0.0) {
                    return Err(err(format!("v_ref must be finite and > 0, got {v}")));
                }
                p.scale_voltage(v)
            }
            (None, Some(_), None) => return Err(err("v_ref needs physical params".into())),
            (Some(_), Some(_), _) => {
                return Err(err("give exactly one of y_star and v_ref".into()))
            }
            (None, None, _) => return Err(err("missing y_star (or v_ref)".into())),
        };
        if !(y_star.is_finite() && y_star > 0.0) {
            return Err(err(format!("y_star must be finite and > 0, got {y_star}")));
        }
        self.integrator.validate().map_err(err)?;

        let mut xi0 = Vector2::zeros();
        let system = match self.controller {
            None => None,
            Some(c) => {
                let (controller, observer) = match c {
                    ControllerConfig::Pi { kp, ki, u0 } => (
                        Controller::Pi(PiGains::new(kp, ki, u0).map_err(core)?),
                        None,
                    ),
                    ControllerConfig::IdaAlpha { alpha } => (
                        Controller::IdaAlpha(IdaAlpha::new(alpha).map_err(core)?),
                        None,
                    ),
                    ControllerConfig::IdaK { k } => {
                        (Controller::IdaK(IdaK::new(k).map_err(core)?), None)
                    }
                    ControllerConfig::PidPbc {
                        kp,
                        ki,
                        mode,
                        reference,
                        observer,
                    } => {
                        let mode = match mode {
                            ModeConfig::Feedforward => PidPbcMode::Feedforward,
                            ModeConfig::Literal => PidPbcMode::Literal,
                        };
                        let law = match reference {
                            ReferenceConfig::Lossless => {
                                PidPbc::new(&scaled, y_star, kp, ki, mode).map_err(core)?
                            }
                            ReferenceConfig::MinimalCurrent => {
                                if scaled.d1 <= 0.0 {
                                    return Err(err(
                                        "minimal-current reference needs d1 > 0".into()
                                    ));
                                }
                                let eq = assignable_equilibria(&scaled, y_star)
                                    .map_err(core)?
                                    .into_iter()
                                    .find(|e| e.branch == Branch::MinimalCurrent)
                                    .ok_or_else(|| err("no minimal-current equilibrium".into()))?;
                                PidPbc::with_reference(kp, ki, eq.x1_bar, eq.u_bar, mode)
                                    .map_err(core)?
                            }
                        };
                        let block = observer.map(|o| {
                            xi0 = Vector2::from(o.xi0);
                            ObserverBlock {
                                config: ObserverConfig {
                                    lambda: o.lambda,
                                    gamma: o.gamma,
                                    mu: o.mu,
                                    innovation: match o.innovation {
                                        InnovationConfig::MeasurementMinusCopy => {
                                            InnovationSign::MeasurementMinusCopy
                                        }
                                        InnovationConfig::CopyMinusMeasurement => {
                                            InnovationSign::CopyMinusMeasurement
                                        }
                                    },
                                },
                                theta0: Vector2::from(o.theta0),
                            }
                        });
                        (Controller::PidPbc(law), block)
                    }
                };
                let mut sys = ClosedLoopSystem::new(scaled, y_star, controller).map_err(core)?;
                if let Some(block) = observer {
                    sys = sys.with_observer(block).map_err(core)?;
                }
                Some(sys.with_clamp(self.clamp))
            }
        };

        if !self.runs.is_empty() && system.is_none() {
            return Err(err("runs need a controller".into()));
        }
        let core_dim = system.map(|s| s.layout().core_dim()).unwrap_or(2);
        for (i, run) in self.runs.iter().enumerate() {
            let n = run.x0.len();
            if !(n == core_dim || (n == 2 && core_dim == 3)) {
                return Err(err(format!(
                    "run {i}: x0 has {n} entries, expected {core_dim}"
                )));
            }
            if run.x0.iter().any(|v| !v.is_finite()) {
                return Err(err(format!("run {i}: x0 must be finite")));
            }
            if !(run.t_end.is_finite() && run.t_end > 0.0) {
                return Err(err(format!("run {i}: t_end must be finite and > 0")));
            }
            if run.stride == Some(0) || run.max_steps == Some(0) {
                return Err(err(format!("run {i}: stride and max_steps must be >= 1")));
            }
            if let Some(ic) = &run.integrator {
                ic.validate().map_err(|m| err(format!("run {i}: {m}")))?;
            }
        }
        if let Some(g) = &self.phase_grid {
            let finite = g.x1.iter().chain(&g.x2).all(|v| v.is_finite());
            if !finite || g.n1 == 0 || g.n2 == 0 || !(g.t_end.is_finite() && g.t_end > 0.0) {
                return Err(err(
                    "phase_grid needs finite bounds, n1, n2 >= 1 and t_end > 0".into(),
                ));
            }
        }
        if let Some(d) = &self.doa {
            if !(d.q_scale.is_finite() && d.q_scale > 0.0)
                || d.samples == 0
                || !(d.t_end.is_finite() && d.t_end > 0.0)
            {
                return Err(err(
                    "doa needs q_scale > 0, samples >= 1 and t_end > 0".into()
                ));
            }
        }

        Ok(Resolved {
            name: self.name.clone(),
            scaled,
            physical,
            y_star,
            v_ref: self.v_ref,
            system,
            xi0,
        })
    }
}

impl RunConfig {
    pub fn initial_state(&self, r: &Resolved) -> Result<Vec<f64>, CliError> {
        let sys = r.system()?;
        let mut core = self.x0.clone();
        if core.len() == 2 && sys.layout().core_dim() == 3 {
            core.push(0.0);
        }
        sys.initial_state(&core, r.xi0)
            .map_err(|e| CliError::Config(format!("{}: {e}", r.name)))
    }
}
