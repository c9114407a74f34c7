//! Closed-loop assembly, integration and outcome classification.
//!
//! State layout (fixed):
//!
//! | slots        | content                                              |
//! |--------------|------------------------------------------------------|
//! | 0, 1         | plant `x1`, `x2`                                     |
//! | 2            | controller integrator `x_c` (PI and PID-PBC only)    |
//! | next 15      | observer: `xi`(2), `Phi`(4, row-major), `Y`(2),      |
//! |              | `Omega`(4, row-major), `omega`, `theta_hat`(2)       |
//! | next 1       | running integral of `Delta^2` (with observer only)   |

mod export;
pub mod ode;

use nalgebra::Vector2;
use rayon::prelude::*;

use crate::controllers::{
    ida_alpha_control, ida_k_control, pi_control, pid_pbc_control, IdaAlpha, IdaK, PiGains, PidPbc,
};
use crate::equilibria::pi_equilibria;
use crate::error::{Error, Result};
use crate::model::{energy, power_balance, vector_field, ScaledParams, ScaledState};
use crate::observer::{fct_estimate, observer_derivative, ObserverConfig, ObserverState};

pub use export::{write_csv, write_extended_csv, CSV_HEADER, EXTENDED_COLUMNS};
pub use ode::{DenseSegment, Halt, Method, OdeSolution, OdeSystem, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Controller {
    Pi(PiGains),
    IdaAlpha(IdaAlpha),
    IdaK(IdaK),
    PidPbc(PidPbc),
}

impl Controller {
    pub fn is_dynamic(&self) -> bool {
        matches!(self, Controller::Pi(_) | Controller::PidPbc(_))
    }

    pub fn label(&self) -> &'static str {
        match self {
            Controller::Pi(_) => "pi",
            Controller::IdaAlpha(_) => "ida-alpha",
            Controller::IdaK(_) => "ida-k",
            Controller::PidPbc(_) => "pid-pbc",
        }
    }
}

/// Observer attached to a PID-PBC loop; `x1` is then replaced by its
/// estimate in the passive output.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObserverBlock {
    pub config: ObserverConfig,
    /// Initial parameter estimate `theta_hat(0)`.
    pub theta0: Vector2<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StateLayout {
    pub dim: usize,
    pub xc: Option<usize>,
    pub observer: Option<usize>,
    /// Slot of the running integral of `Delta^2`.
    pub excitation: Option<usize>,
}

impl StateLayout {
    /// Plant plus controller slots.
    pub fn core_dim(&self) -> usize {
        self.observer.unwrap_or(self.dim)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClosedLoopSystem {
    pub plant: ScaledParams,
    pub y_star: f64,
    pub controller: Controller,
    pub observer: Option<ObserverBlock>,
    /// Saturate `u` to `[0, 1]`. Off by default.
    pub clamp: bool,
}

impl ClosedLoopSystem {
    pub fn new(plant: ScaledParams, y_star: f64, controller: Controller) -> Result<Self> {
        plant.validate()?;
        if !(y_star.is_finite() && y_star > 0.0) {
            return Err(Error::ParameterDomain(format!(
                "y* must be finite and > 0, got {y_star}"
            )));
        }
        if let Controller::Pi(g) = &controller {
            g.validate()?;
        }
        Ok(Self {
            plant,
            y_star,
            controller,
            observer: None,
            clamp: false,
        })
    }

    pub fn with_observer(mut self, block: ObserverBlock) -> Result<Self> {
        if !matches!(self.controller, Controller::PidPbc(_)) {
            return Err(Error::NotApplicable(
                "the observer only feeds the PID-PBC".into(),
            ));
        }
        block.config.validate()?;
        self.observer = Some(block);
        Ok(self)
    }

    pub fn with_clamp(mut self, clamp: bool) -> Self {
        self.clamp = clamp;
        self
    }

    pub fn layout(&self) -> StateLayout {
        let mut dim = 2;
        let xc = self.controller.is_dynamic().then(|| {
            dim += 1;
            2
        });
        let (observer, excitation) = match self.observer {
            Some(_) => {
                let start = dim;
                dim += ObserverState::LEN + 1;
                (Some(start), Some(start + ObserverState::LEN))
            }
            None => (None, None),
        };
        StateLayout {
            dim,
            xc,
            observer,
            excitation,
        }
    }

    /// Full initial state from the plant/controller part (`[x1, x2]` or
    /// `[x1, x2, x_c]`) and the observer copy `xi(0)`.
    pub fn initial_state(&self, core: &[f64], xi0: Vector2<f64>) -> Result<Vec<f64>> {
        let layout = self.layout();
        if core.len() != layout.core_dim() {
            return Err(Error::State(format!(
                "expected {} plant/controller entries, got {}",
                layout.core_dim(),
                core.len()
            )));
        }
        let mut x = core.to_vec();
        if let Some(block) = &self.observer {
            let mut obs = [0.0; ObserverState::LEN];
            ObserverState::initial(xi0, block.theta0).write_to(&mut obs);
            x.extend_from_slice(&obs);
            x.push(0.0);
        }
        Ok(x)
    }

    fn observer_state(&self, s: &[f64]) -> Result<Option<ObserverState>> {
        match self.layout().observer {
            Some(start) => Ok(Some(ObserverState::read_from(
                &s[start..start + ObserverState::LEN],
            )?)),
            None => Ok(None),
        }
    }

    /// `x1` as seen by the controller: measured, or the observer estimate.
    pub fn x1_estimate(&self, s: &[f64]) -> Result<f64> {
        match (&self.observer, self.observer_state(s)?) {
            (Some(block), Some(os)) => Ok(fct_estimate(&block.config, &os, &block.theta0).x_hat[0]),
            _ => Ok(s[0]),
        }
    }

    /// Duty cycle and integrator rate at state `s` (rate zero for static laws).
    fn law(&self, s: &[f64]) -> Result<(f64, f64)> {
        let x2 = s[1];
        let (u, xc_dot) = match &self.controller {
            Controller::Pi(g) => {
                let out = pi_control(g, self.y_star, x2, s[2]);
                (out.u, out.xc_dot)
            }
            Controller::IdaAlpha(law) => (ida_alpha_control(law, self.y_star, x2)?, 0.0),
            Controller::IdaK(law) => (ida_k_control(law, self.y_star, x2), 0.0),
            Controller::PidPbc(law) => {
                let out = pid_pbc_control(law, self.y_star, x2, self.x1_estimate(s)?, s[2]);
                (out.u, out.xc_dot)
            }
        };
        let u = if self.clamp { u.clamp(0.0, 1.0) } else { u };
        Ok((u, xc_dot))
    }

    pub fn control(&self, s: &[f64]) -> Result<f64> {
        Ok(self.law(s)?.0)
    }

    /// Closed-loop equilibria over the plant/controller slots.
    pub fn known_equilibria(&self) -> Result<Vec<Vec<f64>>> {
        let sp = &self.plant;
        let y = self.y_star;
        Ok(match &self.controller {
            Controller::Pi(g) => pi_equilibria(sp, y, g)?
                .into_iter()
                .filter_map(|e| e.chi().map(|c| c.to_vec()))
                .collect(),
            Controller::IdaAlpha(_) | Controller::IdaK(_) => {
                if sp.d1 == 0.0 {
                    vec![vec![sp.d2 * y * y, y]]
                } else {
                    Vec::new()
                }
            }
            Controller::PidPbc(law) => vec![vec![law.x1_star, y, law.equilibrium_integrator()]],
        })
    }
}

impl OdeSystem for ClosedLoopSystem {
    fn dim(&self) -> usize {
        self.layout().dim
    }

    fn rhs(&self, _t: f64, s: &[f64], ds: &mut [f64]) -> Result<()> {
        let layout = self.layout();
        let (u, xc_dot) = self.law(s)?;
        let x = ScaledState::new(s[0], s[1]);
        let f = vector_field(&self.plant, x, u);
        ds[0] = f.x1;
        ds[1] = f.x2;
        if let Some(i) = layout.xc {
            ds[i] = xc_dot;
        }
        if let (Some(block), Some(start), Some(exc)) =
            (&self.observer, layout.observer, layout.excitation)
        {
            let os = ObserverState::read_from(&s[start..start + ObserverState::LEN])?;
            let d = observer_derivative(&block.config, &self.plant, &os, u, s[1]);
            d.write_to(&mut ds[start..start + ObserverState::LEN]);
            ds[exc] = os.delta().powi(2);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Outcome {
    /// Settled at `known[index]`.
    Converged {
        index: usize,
        target: Vec<f64>,
    },
    Diverged,
    OriginCollapse,
    Timeout,
}

impl Outcome {
    pub fn label(&self) -> String {
        match self {
            Outcome::Converged { target, .. } => {
                let parts: Vec<String> = target.iter().map(|v| format!("{v}")).collect();
                format!("converged({})", parts.join(";"))
            }
            Outcome::Diverged => "diverged".into(),
            Outcome::OriginCollapse => "origin-collapse".into(),
            Outcome::Timeout => "timeout".into(),
        }
    }

    pub fn is_converged(&self) -> bool {
        matches!(self, Outcome::Converged { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tolerances {
    pub equilibrium: f64,
    pub velocity: f64,
    pub origin: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            equilibrium: 1e-3,
            velocity: 1e-4,
            origin: 1e-3,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub controls: Vec<f64>,
    /// `H` at each sample.
    pub energy: Vec<f64>,
    /// Analytic `dH/dtau` at each sample.
    pub energy_rate: Vec<f64>,
    pub dense: Vec<DenseSegment>,
    pub halt: Halt,
    pub outcome: Outcome,
    /// `u` was saturated at some sample.
    pub clamped: bool,
    pub layout: StateLayout,
    /// Vector field at the final state (empty if it could not be evaluated).
    pub final_rate: Vec<f64>,
}

impl Trajectory {
    pub fn final_state(&self) -> &[f64] {
        self.states
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn final_time(&self) -> f64 {
        *self
            .times
            .last()
            .expect("trajectory has at least one sample")
    }

    pub fn column(&self, slot: usize) -> Vec<f64> {
        self.states.iter().map(|s| s[slot]).collect()
    }

    /// State at time `t`: dense output when available, else linear
    /// interpolation between samples. Clamped to the covered interval.
    pub fn interpolate(&self, t: f64) -> Vec<f64> {
        let t = t.clamp(self.times[0], self.final_time());
        if !self.dense.is_empty() {
            let i = self
                .dense
                .partition_point(|seg| seg.t1() < t)
                .min(self.dense.len() - 1);
            return self.dense[i].eval(t);
        }
        let i = self.times.partition_point(|&s| s < t);
        if i == 0 {
            return self.states[0].clone();
        }
        let (t0, t1) = (self.times[i - 1], self.times[i]);
        let w = (t - t0) / (t1 - t0);
        self.states[i - 1]
            .iter()
            .zip(&self.states[i])
            .map(|(a, b)| a + w * (b - a))
            .collect()
    }
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).powi(2))
        .sum::<f64>()
        .sqrt()
}

pub fn classify_outcome(traj: &Trajectory, known: &[Vec<f64>], tol: &Tolerances) -> Outcome {
    if traj.halt == Halt::Diverged {
        return Outcome::Diverged;
    }
    let core = traj.layout.core_dim();
    let last = &traj.final_state()[..core];
    let speed = if traj.final_rate.len() >= core {
        traj.final_rate[..core]
            .iter()
            .map(|v| v * v)
            .sum::<f64>()
            .sqrt()
    } else {
        f64::INFINITY
    };
    for (index, eq) in known.iter().enumerate() {
        if eq.len() == core && distance(last, eq) < tol.equilibrium && speed < tol.velocity {
            return Outcome::Converged {
                index,
                target: eq.clone(),
            };
        }
    }
    if last[0].hypot(last[1]) < tol.origin {
        return Outcome::OriginCollapse;
    }
    Outcome::Timeout
}

pub fn integrate(
    sys: &ClosedLoopSystem,
    x0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Trajectory> {
    if !(t_end.is_finite() && t_end > 0.0) {
        return Err(Error::ParameterDomain(format!(
            "t_end must be finite and > 0, got {t_end}"
        )));
    }
    let layout = sys.layout();
    if x0.len() != layout.dim {
        return Err(Error::State(format!(
            "expected {} state entries, got {}",
            layout.dim,
            x0.len()
        )));
    }
    let sol = ode::solve(sys, x0, t_end, opts)?;

    let mut controls = Vec::with_capacity(sol.times.len());
    let mut clamped = false;
    for s in &sol.states {
        let u = match sys.clamp {
            true => {
                let raw = ClosedLoopSystem {
                    clamp: false,
                    ..*sys
                }
                .control(s)
                .unwrap_or(f64::NAN);
                clamped |= !(0.0..=1.0).contains(&raw);
                raw.clamp(0.0, 1.0)
            }
            false => sys.control(s).unwrap_or(f64::NAN),
        };
        controls.push(u);
    }
    let energy = sol
        .states
        .iter()
        .map(|s| energy(ScaledState::new(s[0], s[1])))
        .collect();
    let energy_rate = sol
        .states
        .iter()
        .map(|s| power_balance(&sys.plant, ScaledState::new(s[0], s[1])))
        .collect();
    let last = sol
        .states
        .last()
        .expect("solver returns the initial sample");
    let mut final_rate = vec![0.0; layout.dim];
    if sys
        .rhs(*sol.times.last().unwrap(), last, &mut final_rate)
        .is_err()
    {
        final_rate.clear();
    }
    let mut traj = Trajectory {
        times: sol.times,
        states: sol.states,
        controls,
        energy,
        energy_rate,
        dense: sol.dense,
        halt: sol.halt,
        outcome: Outcome::Timeout,
        clamped,
        layout,
        final_rate,
    };
    let known = sys.known_equilibria().unwrap_or_default();
    traj.outcome = classify_outcome(&traj, &known, &Tolerances::default());
    if traj.halt == Halt::StepUnderflow {
        return Err(Error::Stiff {
            t: traj.final_time(),
            partial: Box::new(traj),
        });
    }
    Ok(traj)
}

/// Rectangle of initial `(x1, x2)` values, endpoints included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub x1: (f64, f64),
    pub x2: (f64, f64),
    pub n1: usize,
    pub n2: usize,
}

impl Grid {
    pub fn points(&self) -> Vec<[f64; 2]> {
        let lin = |(lo, hi): (f64, f64), n: usize, i: usize| {
            if n <= 1 {
                0.5 * (lo + hi)
            } else {
                lo + (hi - lo) * i as f64 / (n - 1) as f64
            }
        };
        (0..self.n1)
            .flat_map(|i| {
                (0..self.n2).map(move |j| [lin(self.x1, self.n1, i), lin(self.x2, self.n2, j)])
            })
            .collect()
    }
}

/// One trajectory per grid point (integrator state starts at zero), run in
/// parallel. Results follow the order of [`Grid::points`].
pub fn phase_portrait(
    sp: &ScaledParams,
    controller: Controller,
    y_star: f64,
    grid: &Grid,
    t_end: f64,
    opts: &SolverOptions,
) -> Result<Vec<Trajectory>> {
    let sys = ClosedLoopSystem::new(*sp, y_star, controller)?;
    grid.points()
        .par_iter()
        .map(|p| {
            let mut x0 = p.to_vec();
            if controller.is_dynamic() {
                x0.push(0.0);
            }
            integrate(&sys, &x0, t_end, opts)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnergyAudit {
    /// Max discrepancy between the finite-difference `dH/dtau` and the power balance.
    pub max_abs: f64,
    /// Same discrepancy divided by `1 + d1 x1^2 + d2 x2^2 + |x1|`.
    pub max_rel: f64,
    /// Time of the largest absolute discrepancy.
    pub at: f64,
}

// 5-point Gauss-Legendre nodes and weights on [0, 1].
const GAUSS_NODES: [f64; 5] = [
    0.046_910_077_030_668,
    0.230_765_344_947_158_5,
    0.5,
    0.769_234_655_052_841_5,
    0.953_089_922_969_332,
];
const GAUSS_WEIGHTS: [f64; 5] = [
    0.118_463_442_528_094_5,
    0.239_314_335_249_683_2,
    0.284_444_444_444_444_4,
    0.239_314_335_249_683_2,
    0.118_463_442_528_094_5,
];

/// Compares the finite-difference rate of change of `H` between samples
/// with the analytic power balance. With dense output the difference
/// quotient over each step is matched against the step mean of the power
/// balance (Gauss-Legendre on the interpolant); fixed-step runs use central
/// differences against the point value.
pub fn energy_audit(traj: &Trajectory, sp: &ScaledParams) -> EnergyAudit {
    let mut audit = EnergyAudit {
        max_abs: 0.0,
        max_rel: 0.0,
        at: traj.times[0],
    };
    let pb = |x: &[f64]| power_balance(sp, ScaledState::new(x[0], x[1]));
    let scale = |x: &[f64]| 1.0 + sp.d1 * x[0] * x[0] + sp.d2 * x[1] * x[1] + x[0].abs();
    let mut record = |t: f64, diff: f64, scale: f64| {
        if diff > audit.max_abs {
            audit.max_abs = diff;
            audit.at = t;
        }
        audit.max_rel = audit.max_rel.max(diff / scale);
    };
    let h_of = |x: &[f64]| energy(ScaledState::new(x[0], x[1]));
    if !traj.dense.is_empty() {
        for seg in &traj.dense {
            let x0 = seg.eval(seg.t0);
            let x1 = seg.eval(seg.t1());
            let fd = (h_of(&x1) - h_of(&x0)) / seg.h;
            let mut mean = 0.0;
            let mut sc: f64 = 0.0;
            for (c, w) in GAUSS_NODES.iter().zip(GAUSS_WEIGHTS) {
                let x = seg.eval(seg.t0 + c * seg.h);
                mean += w * pb(&x);
                sc = sc.max(scale(&x));
            }
            record(seg.t0 + 0.5 * seg.h, (fd - mean).abs(), sc);
        }
    } else {
        for i in 1..traj.times.len().saturating_sub(1) {
            let dh =
                (traj.energy[i + 1] - traj.energy[i - 1]) / (traj.times[i + 1] - traj.times[i - 1]);
            let s = &traj.states[i];
            record(traj.times[i], (dh - pb(s)).abs(), scale(s));
        }
    }
    audit
}
