//! Built-in experiments with the published parameters and initial conditions.

use crate::config::{
    ControllerConfig, DoaConfig, ExperimentConfig, GridConfig, IntegratorConfig, ModeConfig,
    ObserverSettings, PlantConfig, ReferenceConfig, RunConfig,
};

pub const NAMES: [&str; 7] = ["fig1", "fig2", "fig3", "fig4", "fig5", "fig6", "pid-pbc"];

fn base(
    name: &str,
    d1: f64,
    d2: f64,
    y_star: f64,
    controller: Option<ControllerConfig>,
) -> ExperimentConfig {
    ExperimentConfig {
        name: name.into(),
        params: PlantConfig::Scaled { d1, d2 },
        y_star: Some(y_star),
        v_ref: None,
        controller,
        integrator: IntegratorConfig::default(),
        runs: Vec::new(),
        phase_grid: None,
        doa: None,
        out_dir: None,
        clamp: false,
    }
}

fn run(x0: &[f64], t_end: f64) -> RunConfig {
    RunConfig {
        x0: x0.to_vec(),
        t_end,
        integrator: None,
        stride: None,
        max_steps: None,
    }
}

const PI_GAINS: ControllerConfig = ControllerConfig::Pi {
    kp: 2.0,
    ki: 1.0,
    u0: 0.5,
};

/// Every config of a preset, or `None` for an unknown name.
pub fn preset(name: &str) -> Option<Vec<ExperimentConfig>> {
    let cfgs = match name {
        // Zero-dynamics right-hand side below and at the existence boundary.
        "fig1" => vec![
            base("fig1a", 0.25, 0.75, 1.0, None),
            base("fig1b", 0.25, 1.0, 1.0, None),
        ],
        "fig2" => {
            let mut c = base("fig2", 0.0, 1.0, 2.0, Some(PI_GAINS));
            c.runs = vec![
                run(&[4.0, 2.0, 0.0], 10.0),
                // Collapse toward the origin is algebraic, hence the long
                // horizon; the oscillation speeds up, hence the stride.
                RunConfig {
                    stride: Some(100),
                    ..run(&[3.9, 2.0, 0.0], 800.0)
                },
                // Linear, stiff growth up to the divergence guard.
                RunConfig {
                    integrator: Some(IntegratorConfig::Rosenbrock {
                        rtol: 1e-8,
                        atol: 1e-8,
                    }),
                    ..run(&[4.1, 2.0, 0.0], 1e8)
                },
            ];
            vec![c]
        }
        "fig3" => {
            let mut c = base("fig3", 0.25, 0.75, 1.0, Some(PI_GAINS));
            c.runs = vec![
                run(&[1.0, 1.0, 0.25], 200.0),
                run(&[0.9, 1.0, 0.25], 200.0),
                run(&[1.1, 1.0, 0.25], 200.0),
            ];
            vec![c]
        }
        "fig4" => {
            let mut c = base("fig4", 0.25, 0.75, 1.0, Some(PI_GAINS));
            c.runs = vec![
                run(&[3.0, 1.0, -0.25], 200.0),
                run(&[2.5, 1.2, 0.0], 200.0),
                run(&[3.5, 0.9, -1.0], 200.0),
            ];
            c.doa = Some(DoaConfig::default());
            vec![c]
        }
        "fig5" => {
            let mut c = base(
                "fig5",
                0.0,
                1.0,
                2.0,
                Some(ControllerConfig::IdaAlpha { alpha: 0.5 }),
            );
            c.runs = vec![run(&[4.5, 1.5], 300.0)];
            c.phase_grid = Some(GridConfig {
                x1: [0.2, 8.0],
                x2: [0.2, 4.0],
                n1: 6,
                n2: 6,
                t_end: 300.0,
            });
            c.doa = Some(DoaConfig::default());
            vec![c]
        }
        "fig6" => {
            let mut c = base(
                "fig6",
                0.0,
                1.0,
                1.0,
                Some(ControllerConfig::IdaK { k: 4.0 }),
            );
            c.runs = vec![
                run(&[0.3, 0.3], 300.0),
                run(&[3.0, 0.5], 300.0),
                run(&[2.0, 2.5], 300.0),
            ];
            c.phase_grid = Some(GridConfig {
                x1: [0.2, 4.0],
                x2: [0.2, 3.0],
                n1: 5,
                n2: 5,
                t_end: 300.0,
            });
            c.doa = Some(DoaConfig::default());
            vec![c]
        }
        "pid-pbc" => {
            let mut c = base(
                "pid-pbc",
                0.0,
                1.0,
                1.0,
                Some(ControllerConfig::PidPbc {
                    kp: 1.0,
                    ki: 1.0,
                    mode: ModeConfig::Feedforward,
                    reference: ReferenceConfig::Lossless,
                    observer: Some(ObserverSettings::default()),
                }),
            );
            c.runs = vec![run(&[0.5, 0.8, 0.0], 50.0)];
            vec![c]
        }
        _ => return None,
    };
    Some(cfgs)
}
