use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use boostlab_core::analysis::{
    appendix_a_check, estimate_doa, gain_conditions, lyapunov_solve, p3_lower_bound, pi_jacobian,
    pi_stability, routh_hurwitz, static_law_doa, zero_dynamics, DoaEstimate, DoaOptions, StaticLaw,
    Verdict,
};
use boostlab_core::controllers::PiGains;
use boostlab_core::equilibria::{
    assignable_equilibria, existence_condition, pi_equilibria, Branch,
};
use boostlab_core::observer::{excitation_monitor, fct_estimate, ObserverState};
use boostlab_core::sim::{
    energy_audit, integrate, phase_portrait, write_csv, write_extended_csv, ClosedLoopSystem,
    Controller, Grid, Halt, Outcome, SolverOptions, Trajectory,
};
use boostlab_core::{Error, ScaledParams};
use nalgebra::Vector2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, Resolved, RunConfig};
use crate::error::CliError;
use crate::svg::{Plot, Series, PALETTE};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Csv,
    Svg,
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }
    fn svg(self) -> bool {
        matches!(self, Format::Svg | Format::Both)
    }
}

/// Where artifacts go. Every file has exactly one writer.
#[derive(Debug, Clone)]
pub struct Sink {
    pub dir: PathBuf,
    pub format: Format,
}

impl Sink {
    fn write(&self, name: &str, content: &[u8]) -> Result<PathBuf, CliError> {
        fs::create_dir_all(&self.dir)?;
        let path = self.dir.join(name);
        fs::write(&path, content)?;
        Ok(path)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("report serialises");
        text.push('\n');
        self.write(name, text.as_bytes())
    }
}

fn fmt_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

// ---------------------------------------------------------------- equilibria

#[derive(Serialize)]
struct EquilibriumRow {
    branch: &'static str,
    x1: f64,
    x2: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    x3: Option<f64>,
    u: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    inductor_current: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    capacitor_voltage: Option<f64>,
}

#[derive(Serialize)]
struct EquilibriaReport {
    name: String,
    d1: f64,
    d2: f64,
    y_star: f64,
    exists: bool,
    scaled_margin: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    physical_margin: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    time_unit: Option<f64>,
    equilibria: Vec<EquilibriumRow>,
}

pub fn equilibria(
    cfgs: &[ExperimentConfig],
    sink: Option<&Sink>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    for cfg in cfgs {
        let r = cfg.resolve()?;
        let sp = r.scaled;
        let ex = existence_condition(&sp, r.y_star)?;
        let physical_margin = r.physical.map(|p| p.existence_margin(r.y_star * p.e));
        writeln!(
            w,
            "[{}] d1 = {}, d2 = {}, y* = {}",
            r.name, sp.d1, sp.d2, r.y_star
        )?;
        writeln!(
            w,
            "  existence margin 1/(4 y*^2) - d1 d2 = {:.6e}",
            ex.margin
        )?;
        if let (Some(m), Some(p)) = (physical_margin, r.physical) {
            writeln!(
                w,
                "  existence margin E^2/(4 v*^2) - R G = {:.6e} (v* = {} V)",
                m,
                r.y_star * p.e
            )?;
        }
        let mut rows = Vec::new();
        if !ex.satisfied {
            writeln!(w, "  no equilibrium: d1 d2 >= 1/(4 y*^2)")?;
        } else {
            let pi = match r.system.map(|s| s.controller) {
                Some(Controller::Pi(g)) => Some(g),
                _ => None,
            };
            let eqs = match &pi {
                Some(g) => pi_equilibria(&sp, r.y_star, g)?,
                None => assignable_equilibria(&sp, r.y_star)?,
            };
            for e in eqs {
                let phys = r.physical.map(|p| p.unscale_state(e.state()));
                writeln!(
                    w,
                    "  {:<16} x = {}  u = {:.6}{}",
                    e.branch.label(),
                    fmt_vec(
                        &e.chi()
                            .map(|c| c.to_vec())
                            .unwrap_or(vec![e.x1_bar, e.x2_bar])
                    ),
                    e.u_bar,
                    phys.map(|(i, v)| format!("  (i_L = {i:.6} A, v_C = {v:.6} V)"))
                        .unwrap_or_default()
                )?;
                rows.push(EquilibriumRow {
                    branch: e.branch.label(),
                    x1: e.x1_bar,
                    x2: e.x2_bar,
                    x3: e.x3_bar,
                    u: e.u_bar,
                    inductor_current: phys.map(|p| p.0),
                    capacitor_voltage: phys.map(|p| p.1),
                });
            }
        }
        if let Some(s) = sink {
            s.json(
                &format!("{}_equilibria.json", r.name),
                &EquilibriaReport {
                    name: r.name.clone(),
                    d1: sp.d1,
                    d2: sp.d2,
                    y_star: r.y_star,
                    exists: ex.satisfied,
                    scaled_margin: ex.margin,
                    physical_margin,
                    time_unit: r.physical.map(|p| p.time_unit()),
                    equilibria: rows,
                },
            )?;
        }
    }
    Ok(())
}

// ----------------------------------------------------------------- stability

#[derive(Serialize)]
struct StabilityRow {
    branch: &'static str,
    equilibrium: [f64; 3],
    a0: f64,
    a1: f64,
    a2: f64,
    hurwitz_determinant: f64,
    verdict: &'static str,
    failing_condition: Option<&'static str>,
    eigenvalues: Vec<[f64; 2]>,
}

#[derive(Serialize)]
struct StabilityJson {
    name: String,
    d1: f64,
    d2: f64,
    y_star: f64,
    kp: f64,
    ki: f64,
    u0: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    gain_conditions: Option<[bool; 2]>,
    equilibria: Vec<StabilityRow>,
}

fn pi_gains(r: &Resolved) -> Result<PiGains, CliError> {
    match r.system()?.controller {
        Controller::Pi(g) => Ok(g),
        other => Err(CliError::Config(format!(
            "{}: this report needs a PI controller, got {}",
            r.name,
            other.label()
        ))),
    }
}

pub fn stability(
    cfgs: &[ExperimentConfig],
    sink: Option<&Sink>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    for cfg in cfgs {
        let r = cfg.resolve()?;
        let g = pi_gains(&r)?;
        let sp = r.scaled;
        writeln!(
            w,
            "[{}] d1 = {}, d2 = {}, y* = {}, K_P = {}, K_I = {}, u0 = {}",
            r.name, sp.d1, sp.d2, r.y_star, g.kp, g.ki, g.u0
        )?;
        let gains = if sp.d1 > 0.0 {
            let gc = gain_conditions(sp.d1, r.y_star, g.kp, g.ki)?;
            writeln!(
                w,
                "  gain tuning: K_P >= d1^2/2 {}, K_I >= 5 d1/(16 y*^2) {}",
                if gc.proportional { "holds" } else { "fails" },
                if gc.integral { "holds" } else { "fails" }
            )?;
            Some([gc.proportional, gc.integral])
        } else {
            None
        };
        writeln!(
            w,
            "  {:<16} {:>12} {:>12} {:>12} {:>12}  {:<9} eigenvalues",
            "branch", "a0", "a1", "a2", "a1a2-a0", "verdict"
        )?;
        let mut rows = Vec::new();
        for (eq, rep) in pi_stability(&sp, &g, r.y_star)? {
            let cp = rep.charpoly;
            let eigs: Vec<String> = rep
                .eigenvalues
                .iter()
                .map(|z| format!("{:.4}{:+.4}i", z.re, z.im))
                .collect();
            writeln!(
                w,
                "  {:<16} {:>12.6} {:>12.6} {:>12.6} {:>12.6}  {:<9} {}{}",
                eq.branch.label(),
                cp.a0,
                cp.a1,
                cp.a2,
                cp.hurwitz_determinant(),
                rep.verdict.label(),
                eigs.join(", "),
                rep.failing_condition
                    .map(|c| format!("  [fails {}]", c.label()))
                    .unwrap_or_default()
            )?;
            rows.push(StabilityRow {
                branch: eq.branch.label(),
                equilibrium: eq.chi().expect("PI equilibrium"),
                a0: cp.a0,
                a1: cp.a1,
                a2: cp.a2,
                hurwitz_determinant: cp.hurwitz_determinant(),
                verdict: rep.verdict.label(),
                failing_condition: rep.failing_condition.map(|c| c.label()),
                eigenvalues: rep.eigenvalues.iter().map(|z| [z.re, z.im]).collect(),
            });
        }
        if let Some(s) = sink {
            s.json(
                &format!("{}_stability.json", r.name),
                &StabilityJson {
                    name: r.name.clone(),
                    d1: sp.d1,
                    d2: sp.d2,
                    y_star: r.y_star,
                    kp: g.kp,
                    ki: g.ki,
                    u0: g.u0,
                    gain_conditions: gains,
                    equilibria: rows,
                },
            )?;
        }
    }
    Ok(())
}

// ------------------------------------------------------------- zero dynamics

pub fn zero_dynamics_cmd(
    cfgs: &[ExperimentConfig],
    sink: Option<&Sink>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    for cfg in cfgs {
        let r = cfg.resolve()?;
        zero_dynamics_one(&r, sink, w)?;
    }
    Ok(())
}

fn zero_dynamics_one(r: &Resolved, sink: Option<&Sink>, w: &mut dyn Write) -> Result<(), CliError> {
    let zd = zero_dynamics(&r.scaled, r.y_star)?;
    writeln!(
        w,
        "[{}] zero dynamics, d1 d2 = {}, 1/(4 y*^2) = {}",
        r.name,
        r.scaled.d1 * r.scaled.d2,
        0.25 / (r.y_star * r.y_star)
    )?;
    for p in &zd.equilibria {
        writeln!(
            w,
            "  u = {:.12}  slope = {:+.6e}  {}{}",
            p.u,
            p.slope,
            p.tag.label(),
            if p.double { "  (double root)" } else { "" }
        )?;
    }
    let Some(s) = sink else { return Ok(()) };
    let u_max = 1.25 * zd.largest().map(|p| p.u).unwrap_or(0.0).max(1.0 / r.y_star);
    let n = 400;
    let pts: Vec<(f64, f64)> = (0..=n)
        .map(|i| {
            let u = u_max * i as f64 / n as f64;
            (u, zd.rhs(u))
        })
        .collect();
    if s.format.csv() {
        let mut text = String::from("u,rhs\n");
        for (u, v) in &pts {
            text.push_str(&format!("{u},{v}\n"));
        }
        s.write(&format!("{}_zero_dynamics.csv", r.name), text.as_bytes())?;
    }
    if s.format.svg() {
        let roots: Vec<(f64, f64)> = zd.equilibria.iter().map(|p| (p.u, 0.0)).collect();
        let plot = Plot {
            title: format!("{}: zero dynamics right-hand side", r.name),
            x_label: "u".into(),
            y_label: "du/dtau".into(),
            series: vec![
                Series::line("rhs", PALETTE[0], pts),
                Series::line("", PALETTE[2], vec![(0.0, 0.0), (u_max, 0.0)]),
                Series {
                    scatter: true,
                    ..Series::line("equilibria", PALETTE[1], roots)
                },
            ],
            log_x: false,
        };
        s.write(
            &format!("{}_zero_dynamics.svg", r.name),
            plot.render().as_bytes(),
        )?;
    }
    Ok(())
}

// ------------------------------------------------------------------ simulate

struct RunResult {
    index: usize,
    x0: Vec<f64>,
    traj: Trajectory,
    stiff: bool,
    stride: usize,
}

/// Every `stride`-th sample plus the last one.
fn thin(traj: &Trajectory, stride: usize) -> Trajectory {
    if stride <= 1 {
        return traj.clone();
    }
    let n = traj.times.len();
    let keep: Vec<usize> = (0..n).filter(|i| i % stride == 0 || *i == n - 1).collect();
    let pick = |v: &[f64]| keep.iter().map(|&i| v[i]).collect::<Vec<_>>();
    Trajectory {
        times: pick(&traj.times),
        states: keep.iter().map(|&i| traj.states[i].clone()).collect(),
        controls: pick(&traj.controls),
        energy: pick(&traj.energy),
        energy_rate: pick(&traj.energy_rate),
        dense: Vec::new(),
        ..traj.clone()
    }
}

/// The trajectory and whether the integrator gave up before `t_end`.
fn run_one(
    sys: &ClosedLoopSystem,
    x0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<(Trajectory, bool), CliError> {
    match integrate(sys, x0, t_end, opts) {
        Ok(t) => {
            let limited = t.halt == Halt::StepLimit;
            Ok((t, limited))
        }
        Err(Error::Stiff { partial, .. }) => Ok((*partial, true)),
        Err(e) => Err(e.into()),
    }
}

fn time_plot(title: String, traj: &Trajectory) -> Plot {
    let names = ["x1", "x2", "xc"];
    let series = (0..traj.layout.core_dim())
        .map(|k| {
            let pts = traj
                .times
                .iter()
                .zip(&traj.states)
                .map(|(t, s)| (*t, s[k]))
                .collect();
            Series {
                dashed: k == 1,
                ..Series::line(names[k], [PALETTE[0], PALETTE[1], PALETTE[2]][k], pts)
            }
        })
        .collect();
    Plot {
        title,
        x_label: "tau".into(),
        y_label: "state".into(),
        series,
        log_x: traj.final_time() > 1e4,
    }
}

fn static_law(c: &Controller) -> Option<StaticLaw> {
    match c {
        Controller::IdaAlpha(l) => Some(StaticLaw::Alpha(*l)),
        Controller::IdaK(l) => Some(StaticLaw::K(*l)),
        _ => None,
    }
}

pub fn simulate(
    cfgs: &[ExperimentConfig],
    sink: &Sink,
    rk4_override: Option<f64>,
    stride_override: Option<usize>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let mut stiff_runs = Vec::new();
    for cfg in cfgs {
        let r = cfg.resolve()?;
        let Some(sys) = r.system else {
            zero_dynamics_one(&r, Some(sink), w)?;
            continue;
        };
        let solver = |run: &RunConfig| {
            let mut opts = match rk4_override {
                Some(h) => SolverOptions::rk4(h),
                None => run.integrator.unwrap_or(cfg.integrator).options(),
            };
            if let Some(n) = run.max_steps {
                opts.max_steps = n;
            }
            opts
        };
        let starts = cfg
            .runs
            .iter()
            .map(|run| run.initial_state(&r))
            .collect::<Result<Vec<_>, _>>()?;
        let results: Vec<RunResult> = cfg
            .runs
            .par_iter()
            .zip(starts.par_iter())
            .enumerate()
            .map(|(index, (run, x0))| {
                run_one(&sys, x0, run.t_end, &solver(run)).map(|(traj, stiff)| RunResult {
                    index,
                    x0: run.x0.clone(),
                    traj,
                    stiff,
                    stride: stride_override.or(run.stride).unwrap_or(1),
                })
            })
            .collect::<Result<_, _>>()?;

        writeln!(
            w,
            "[{}] {} loop, y* = {}, {} run(s)",
            r.name,
            sys.controller.label(),
            r.y_star,
            results.len()
        )?;
        results
            .par_iter()
            .map(|res| write_run(&r.name, res, sink))
            .collect::<Result<Vec<()>, CliError>>()?;
        for res in &results {
            let audit = energy_audit(&res.traj, &sys.plant);
            writeln!(
                w,
                "  run {}: x0 = {} -> {}{} at tau = {:.6e}  ({} samples, energy audit abs {:.2e} rel {:.2e}){}",
                res.index,
                fmt_vec(&res.x0),
                res.traj.outcome.label(),
                if sys.clamp { " [clamped mode]" } else { "" },
                res.traj.final_time(),
                res.traj.times.len(),
                audit.max_abs,
                audit.max_rel,
                match (res.stiff, res.traj.halt) {
                    (false, _) => "",
                    (true, Halt::StepLimit) => "  STEP LIMIT",
                    (true, _) => "  STEP UNDERFLOW",
                }
            )?;
            if res.stiff {
                stiff_runs.push(format!("{} run {}", r.name, res.index));
            }
            if let Some(block) = sys.observer {
                observer_summary(&res.traj, &block.config, &block.theta0, w)?;
            }
        }

        if let Some(law) = static_law(&sys.controller) {
            phase_output(cfg, &r, &sys, law, &results, sink, rk4_override, w)?;
        }
    }
    if !stiff_runs.is_empty() {
        return Err(CliError::Numerical(format!(
            "integration stopped early in {}; partial trajectories were written. Stiff runs need the rosenbrock integrator",
            stiff_runs.join(", ")
        )));
    }
    Ok(())
}

fn write_run(name: &str, res: &RunResult, sink: &Sink) -> Result<(), CliError> {
    let stem = format!("{name}_run{}", res.index);
    let traj = thin(&res.traj, res.stride);
    if sink.format.csv() {
        let mut buf = Vec::new();
        if traj.layout.observer.is_some() {
            write_extended_csv(&traj, &mut buf)?;
        } else {
            write_csv(&traj, &mut buf)?;
        }
        sink.write(&format!("{stem}.csv"), &buf)?;
    }
    if sink.format.svg() {
        let title = format!(
            "{name}: x0 = {}, {}",
            fmt_vec(&res.x0),
            res.traj.outcome.label()
        );
        sink.write(
            &format!("{stem}.svg"),
            time_plot(title, &traj).render().as_bytes(),
        )?;
    }
    Ok(())
}

fn observer_summary(
    traj: &Trajectory,
    cfg: &boostlab_core::observer::ObserverConfig,
    theta0: &Vector2<f64>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let (Some(o), Some(e)) = (traj.layout.observer, traj.layout.excitation) else {
        return Ok(());
    };
    let rep = excitation_monitor(cfg, &traj.times, &traj.column(e));
    let last = traj.final_state();
    let os = ObserverState::read_from(&last[o..o + ObserverState::LEN])?;
    let est = fct_estimate(cfg, &os, theta0);
    let err = (est.x_hat - Vector2::new(last[0], last[1])).norm();
    match rep.t_c {
        Some(tc) => writeln!(w, "    excitation reached at tau = {tc:.6}; final |x_hat - x| = {err:.3e}")?,
        None => writeln!(
            w,
            "    excitation not reached (integral {:.3e} < threshold {:.3e}); final |x_hat - x| = {err:.3e}",
            rep.energy, rep.threshold
        )?,
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn phase_output(
    cfg: &ExperimentConfig,
    r: &Resolved,
    sys: &ClosedLoopSystem,
    law: StaticLaw,
    results: &[RunResult],
    sink: &Sink,
    rk4_override: Option<f64>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let mut series = Vec::new();
    if let Some(g) = &cfg.phase_grid {
        let grid = Grid {
            x1: (g.x1[0], g.x1[1]),
            x2: (g.x2[0], g.x2[1]),
            n1: g.n1,
            n2: g.n2,
        };
        let opts = rk4_override
            .map(SolverOptions::rk4)
            .unwrap_or(cfg.integrator.options());
        let trajs = phase_portrait(&sys.plant, sys.controller, r.y_star, &grid, g.t_end, &opts)?;
        let converged = trajs.iter().filter(|t| t.outcome.is_converged()).count();
        writeln!(w, "  phase grid: {converged}/{} converged", trajs.len())?;
        for t in trajs {
            let pts = t.states.iter().map(|s| (s[0], s[1])).collect();
            series.push(Series::line("", "#999999", pts));
        }
    }
    for res in results {
        let pts = res.traj.states.iter().map(|s| (s[0], s[1])).collect();
        series.push(Series::line(format!("run {}", res.index), PALETTE[2], pts));
    }
    if let Some(d) = &cfg.doa {
        let opts = DoaOptions {
            samples: d.samples,
            ..DoaOptions::default()
        };
        match static_law_doa(&sys.plant, &law, r.y_star, &r.q2(d), &opts) {
            Ok(est) => {
                let pts = est
                    .boundary_points(256)?
                    .iter()
                    .map(|p| (p[0], p[1]))
                    .collect();
                writeln!(w, "  attraction estimate: rho = {:.6e}", est.rho)?;
                series.push(Series::line("region estimate", PALETTE[1], pts));
            }
            Err(e) => writeln!(w, "  attraction estimate unavailable: {e}")?,
        }
    }
    if sink.format.svg() && !series.is_empty() {
        let plot = Plot {
            title: format!("{}: phase plane ({})", r.name, sys.controller.label()),
            x_label: "x1".into(),
            y_label: "x2".into(),
            series,
            log_x: false,
        };
        sink.write(&format!("{}_phase.svg", r.name), plot.render().as_bytes())?;
    }
    Ok(())
}

// ----------------------------------------------------------------------- doa

#[derive(Serialize)]
struct DoaJson {
    name: String,
    center: Vec<f64>,
    p: Vec<Vec<f64>>,
    rho: f64,
    samples: usize,
    violations_at_rejected_level: usize,
    checks: usize,
    checks_converged: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    checks_positive: Option<usize>,
}

/// Dimension-erased attraction estimate.
struct Region {
    center: Vec<f64>,
    p: Vec<Vec<f64>>,
    rho: f64,
    samples: usize,
    violations: usize,
    boundary: Vec<Vec<f64>>,
}

impl Region {
    fn from_estimate<const N: usize>(
        est: &DoaEstimate<N>,
        checks: usize,
    ) -> Result<Self, CliError> {
        Ok(Self {
            center: est.center.iter().copied().collect(),
            p: (0..N)
                .map(|i| (0..N).map(|j| est.p[(i, j)]).collect())
                .collect(),
            rho: est.rho,
            samples: est.sample_count,
            violations: est.violation_count,
            boundary: est
                .boundary_points(checks)?
                .iter()
                .map(|v| v.iter().copied().collect())
                .collect(),
        })
    }
}

pub fn doa(
    cfgs: &[ExperimentConfig],
    sink: Option<&Sink>,
    checks: Option<usize>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let mut failures = Vec::new();
    for cfg in cfgs {
        let r = cfg.resolve()?;
        let sys = *r.system()?;
        let d = cfg.doa.unwrap_or_default();
        let n_checks = checks.unwrap_or(d.checks);
        let opts = DoaOptions {
            samples: d.samples,
            ..DoaOptions::default()
        };
        let sp = r.scaled;
        let solver = cfg.integrator.options();

        let Region {
            center,
            p,
            rho,
            samples,
            violations,
            boundary,
        } = match sys.controller {
            Controller::Pi(g) => {
                let eq = pi_refusal(&sp, &g, r.y_star, &r.name)?;
                let a = pi_jacobian(&sp, &g, r.y_star, eq);
                let rep = routh_hurwitz(&boostlab_core::analysis::CharPoly3::from_matrix(&a));
                if rep.verdict != Verdict::Stable {
                    return Err(CliError::Numerical(format!(
                        "{}: maximal-current equilibrium is not Hurwitz: condition {} fails",
                        r.name,
                        rep.failing_condition
                            .map(|c| c.label())
                            .unwrap_or("marginal")
                    )));
                }
                let sol = lyapunov_solve(&a, &r.q3(&d))?;
                let est = estimate_doa(&sp, &g, r.y_star, &sol.p, &opts)?;
                Region::from_estimate(&est, n_checks)?
            }
            ref c => {
                let law = static_law(c).ok_or_else(|| {
                    CliError::Config(format!("{}: no region estimate for {}", r.name, c.label()))
                })?;
                let est = static_law_doa(&sp, &law, r.y_star, &r.q2(&d), &opts)?;
                Region::from_estimate(&est, n_checks)?
            }
        };

        writeln!(
            w,
            "[{}] attraction estimate around {}",
            r.name,
            fmt_vec(&center)
        )?;
        writeln!(w, "  P = {:?}", p)?;
        writeln!(
            w,
            "  rho = {:.6e} ({} samples, {} violations at the first rejected level)",
            rho, samples, violations
        )?;

        let trajs: Vec<Trajectory> = boundary
            .par_iter()
            .map(|x0| integrate(&sys, x0, d.t_end, &solver).map_err(CliError::from))
            .collect::<Result<_, _>>()?;
        let converged = trajs
            .iter()
            .filter(|t| matches!(&t.outcome, Outcome::Converged { target, .. } if close(target, &center)))
            .count();
        let positive = matches!(sys.controller, Controller::IdaK(_)).then(|| {
            trajs
                .iter()
                .filter(|t| t.states.iter().all(|s| s[0] > 0.0 && s[1] > 0.0))
                .count()
        });
        writeln!(
            w,
            "  boundary checks: {converged}/{} converged to the center",
            trajs.len()
        )?;
        if let Some(pos) = positive {
            writeln!(
                w,
                "  boundary checks: {pos}/{} stayed in the positive quadrant",
                trajs.len()
            )?;
        }
        if converged < trajs.len() || positive.is_some_and(|p| p < trajs.len()) {
            failures.push(r.name.clone());
        }

        if let Some(s) = sink {
            if s.format.csv() {
                let dims = center.len();
                let mut text = (1..=dims)
                    .map(|k| format!("x{k}"))
                    .collect::<Vec<_>>()
                    .join(",");
                text.push_str(",outcome\n");
                for (x0, t) in boundary.iter().zip(&trajs) {
                    let xs: Vec<String> = x0.iter().map(|v| format!("{v}")).collect();
                    text.push_str(&format!("{},{}\n", xs.join(","), t.outcome.label()));
                }
                s.write(&format!("{}_doa_boundary.csv", r.name), text.as_bytes())?;
            }
            if s.format.svg() {
                let mut series: Vec<Series> = trajs
                    .iter()
                    .map(|t| {
                        Series::line(
                            "",
                            "#999999",
                            t.states.iter().map(|s| (s[0], s[1])).collect(),
                        )
                    })
                    .collect();
                series.push(Series {
                    scatter: true,
                    ..Series::line(
                        "boundary samples",
                        PALETTE[1],
                        boundary.iter().map(|b| (b[0], b[1])).collect(),
                    )
                });
                let plot = Plot {
                    title: format!("{}: attraction estimate (x1, x2 projection)", r.name),
                    x_label: "x1".into(),
                    y_label: "x2".into(),
                    series,
                    log_x: false,
                };
                s.write(&format!("{}_doa.svg", r.name), plot.render().as_bytes())?;
            }
            s.json(
                &format!("{}_doa.json", r.name),
                &DoaJson {
                    name: r.name.clone(),
                    center,
                    p,
                    rho,
                    samples,
                    violations_at_rejected_level: violations,
                    checks: trajs.len(),
                    checks_converged: converged,
                    checks_positive: positive,
                },
            )?;
        }
    }
    if !failures.is_empty() {
        return Err(CliError::Violation(format!(
            "boundary simulations left the estimate for {}",
            failures.join(", ")
        )));
    }
    Ok(())
}

fn close(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
}

/// Maximal-current equilibrium, or an explanation of why none is stable.
fn pi_refusal(
    sp: &ScaledParams,
    g: &PiGains,
    y_star: f64,
    name: &str,
) -> Result<[f64; 3], CliError> {
    if sp.d1 == 0.0 {
        return Err(CliError::Numerical(format!(
            "{name}: with d1 = 0 the only PI equilibrium has a0 = -K_I < 0, so Routh-Hurwitz condition a0 > 0 fails \
             and there is no region of attraction to estimate"
        )));
    }
    let eq = pi_equilibria(sp, y_star, g)?
        .into_iter()
        .find(|e| e.branch == Branch::MaximalCurrent)
        .ok_or_else(|| CliError::Numerical(format!("{name}: no maximal-current equilibrium")))?;
    Ok(eq.chi().expect("PI equilibrium"))
}

// --------------------------------------------------------------------- sweep

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepKind {
    /// Lossless loop: a0 = -K_I and unstable.
    Lossless,
    /// Minimal-current branch: a0 = -2 K_I r and unstable.
    MinimalBranch,
    /// Maximal-current branch under the gain tuning: all Routh-Hurwitz
    /// conditions and the auxiliary polynomial bounds.
    AppendixA,
}

#[derive(Serialize)]
struct SweepJson {
    kind: SweepKind,
    draws: usize,
    seed: u64,
    violations: usize,
    examples: Vec<String>,
}

#[derive(Debug, Clone, Copy)]
struct Draw {
    sp: ScaledParams,
    y: f64,
    g: PiGains,
}

fn draw(kind: SweepKind, rng: &mut ChaCha8Rng) -> Draw {
    let y = rng.gen_range(0.2..5.0);
    let u0 = rng.gen_range(-2.0..=2.0);
    match kind {
        SweepKind::Lossless => {
            let sp = ScaledParams {
                d1: 0.0,
                d2: rng.gen_range(0.05..5.0),
            };
            let ki = 10.0 - rng.gen_range(0.0..10.0);
            Draw {
                sp,
                y,
                g: PiGains {
                    kp: rng.gen_range(0.0..=10.0),
                    ki,
                    u0,
                },
            }
        }
        SweepKind::MinimalBranch | SweepKind::AppendixA => {
            let d1 = rng.gen_range(0.01..2.0);
            let s: f64 = rng.gen_range(0.001..0.999);
            let sp = ScaledParams {
                d1,
                d2: s / (4.0 * d1 * y * y),
            };
            let g = if kind == SweepKind::AppendixA {
                PiGains {
                    kp: 0.5 * d1 * d1 + rng.gen_range(0.0..10.0),
                    ki: 5.0 / 16.0 * d1 / (y * y) + rng.gen_range(0.0..10.0),
                    u0,
                }
            } else {
                PiGains {
                    kp: rng.gen_range(0.0..=10.0),
                    ki: 10.0 - rng.gen_range(0.0..10.0),
                    u0,
                }
            };
            Draw { sp, y, g }
        }
    }
}

fn check(kind: SweepKind, d: &Draw) -> Result<(), String> {
    let tag = |m: String| {
        format!(
            "d1={} d2={} y*={} K_P={} K_I={}: {m}",
            d.sp.d1, d.sp.d2, d.y, d.g.kp, d.g.ki
        )
    };
    match kind {
        SweepKind::Lossless | SweepKind::MinimalBranch => {
            let res = pi_stability(&d.sp, &d.g, d.y).map_err(|e| tag(e.to_string()))?;
            let (eq, rep) = res
                .iter()
                .find(|(e, _)| matches!(e.branch, Branch::Unique | Branch::MinimalCurrent))
                .ok_or_else(|| tag("equilibrium missing".into()))?;
            let expected = match eq.branch {
                Branch::Unique => -d.g.ki,
                _ => {
                    -2.0 * d.g.ki
                        * boostlab_core::equilibria::branch_offset(&d.sp, d.y)
                            .map_err(|e| tag(e.to_string()))?
                }
            };
            if (rep.charpoly.a0 - expected).abs() > 1e-8 * expected.abs().max(1.0) {
                return Err(tag(format!(
                    "a0 = {} but expected {expected}",
                    rep.charpoly.a0
                )));
            }
            if rep.verdict != Verdict::Unstable {
                return Err(tag(format!("verdict {}", rep.verdict.label())));
            }
        }
        SweepKind::AppendixA => {
            let c = appendix_a_check(&d.sp, &d.g, d.y).map_err(|e| tag(e.to_string()))?;
            if !c.all_conditions {
                return Err(tag(format!(
                    "Routh-Hurwitz fails, a1 a2 - a0 = {}",
                    c.value
                )));
            }
            if c.p1 < 0.0 {
                return Err(tag(format!("p1 = {} < 0", c.p1)));
            }
            if c.p3 < p3_lower_bound(d.sp.d1, d.g.kp, c.r) - 1e-12 {
                return Err(tag(format!("p3 = {} below its bound", c.p3)));
            }
        }
    }
    Ok(())
}

pub fn sweep(
    kind: SweepKind,
    n: usize,
    seed: u64,
    sink: Option<&Sink>,
    w: &mut dyn Write,
) -> Result<(), CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let draws: Vec<Draw> = (0..n).map(|_| draw(kind, &mut rng)).collect();
    let errors: Vec<String> = draws
        .par_iter()
        .filter_map(|d| check(kind, d).err())
        .collect();
    let label = serde_json::to_value(kind)
        .ok()
        .and_then(|v| v.as_str().map(String::from))
        .unwrap_or_default();
    writeln!(
        w,
        "sweep {label}: {n} draws (seed {seed}), {} violation(s)",
        errors.len()
    )?;
    for e in errors.iter().take(5) {
        writeln!(w, "  {e}")?;
    }
    if let Some(s) = sink {
        s.json(
            &format!("sweep_{label}.json"),
            &SweepJson {
                kind,
                draws: n,
                seed,
                violations: errors.len(),
                examples: errors.iter().take(20).cloned().collect(),
            },
        )?;
    }
    if errors.is_empty() {
        Ok(())
    } else {
        Err(CliError::Violation(format!(
            "{} of {n} draws violate the {label} property",
            errors.len()
        )))
    }
}

/// Resolved output directory: explicit flag, then the config, then `out`.
pub fn output_dir(flag: Option<&Path>, cfgs: &[ExperimentConfig]) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| {
            cfgs.iter()
                .find_map(|c| c.out_dir.as_ref().map(PathBuf::from))
        })
        .unwrap_or_else(|| PathBuf::from("out"))
}
