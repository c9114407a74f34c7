use boostlab_core::controllers::{IdaAlpha, IdaK, PiGains, PidPbc, PidPbcMode};
use boostlab_core::observer::ObserverConfig;
use boostlab_core::sim::{
    classify_outcome, integrate, write_csv, write_extended_csv, ClosedLoopSystem, Controller, Halt,
    ObserverBlock, Outcome, SolverOptions, Tolerances, CSV_HEADER, EXTENDED_COLUMNS,
};
use boostlab_core::{Error, ScaledParams};
use nalgebra::Vector2;

fn lossy_loop() -> ClosedLoopSystem {
    ClosedLoopSystem::new(
        ScaledParams::new(0.25, 0.75).unwrap(),
        1.0,
        Controller::Pi(PiGains::new(2.0, 1.0, 0.5).unwrap()),
    )
    .unwrap()
}

#[test]
fn minimal_branch_perturbation_leaves() {
    let sys = lossy_loop();
    let traj = integrate(&sys, &[1.1, 1.0, 0.25], 200.0, &SolverOptions::default()).unwrap();
    match &traj.outcome {
        Outcome::Converged { target, .. } => assert_ne!(target, &vec![1.0, 1.0, 0.25]),
        other => panic!("unexpected {other:?}"),
    }
    let traj = integrate(&sys, &[0.9, 1.0, 0.25], 200.0, &SolverOptions::default()).unwrap();
    assert!(!traj.outcome.is_converged());
}

#[test]
fn ida_alpha_example_converges() {
    let sys = ClosedLoopSystem::new(
        ScaledParams::new(0.0, 1.0).unwrap(),
        2.0,
        Controller::IdaAlpha(IdaAlpha::new(0.5).unwrap()),
    )
    .unwrap();
    let traj = integrate(&sys, &[4.5, 1.5], 300.0, &SolverOptions::default()).unwrap();
    assert_eq!(
        traj.outcome,
        Outcome::Converged {
            index: 0,
            target: vec![4.0, 2.0]
        }
    );
}

#[test]
fn ida_k_equilibrium_start_stays() {
    let sys = ClosedLoopSystem::new(
        ScaledParams::new(0.0, 1.0).unwrap(),
        1.0,
        Controller::IdaK(IdaK::new(4.0).unwrap()),
    )
    .unwrap();
    let traj = integrate(&sys, &[1.0, 1.0], 50.0, &SolverOptions::default()).unwrap();
    assert!(traj
        .states
        .iter()
        .all(|s| (s[0] - 1.0).abs() < 1e-12 && (s[1] - 1.0).abs() < 1e-12));
}

#[test]
fn pid_pbc_modes_share_the_plant_equilibrium() {
    let sp = ScaledParams::new(0.0, 1.0).unwrap();
    for mode in [PidPbcMode::Literal, PidPbcMode::Feedforward] {
        let law = PidPbc::new(&sp, 1.0, 1.0, 1.0, mode).unwrap();
        let sys = ClosedLoopSystem::new(sp, 1.0, Controller::PidPbc(law)).unwrap();
        let traj = integrate(&sys, &[2.0, 0.5, 0.0], 500.0, &SolverOptions::default()).unwrap();
        let s = traj.final_state();
        assert!(
            (s[0] - 1.0).abs() < 1e-6 && (s[1] - 1.0).abs() < 1e-6,
            "{mode:?}: {s:?}"
        );
        assert!((s[2] - law.equilibrium_integrator()).abs() < 1e-6);
        assert!(traj.outcome.is_converged());
    }
}

#[test]
fn stiff_failure_returns_partial_trajectory() {
    let sys = ClosedLoopSystem::new(
        ScaledParams::new(0.0, 1.0).unwrap(),
        2.0,
        Controller::Pi(PiGains::new(2.0, 1.0, 0.5).unwrap()),
    )
    .unwrap();
    let opts = SolverOptions {
        h_min: 1e-2,
        ..SolverOptions::default()
    };
    match integrate(&sys, &[4.1, 2.0, 0.0], 1e4, &opts) {
        Err(Error::Stiff { t, partial }) => {
            assert!(t > 0.0);
            assert_eq!(partial.final_time(), t);
            assert_eq!(partial.halt, Halt::StepUnderflow);
            assert!(partial.times.windows(2).all(|w| w[1] > w[0]));
        }
        other => panic!(
            "expected stiffness error, got {:?}",
            other.map(|t| t.outcome)
        ),
    }
}

#[test]
fn bad_inputs_are_rejected() {
    let sys = lossy_loop();
    assert!(integrate(&sys, &[1.0, 1.0], 1.0, &SolverOptions::default()).is_err());
    assert!(integrate(&sys, &[1.0, 1.0, 0.0], 0.0, &SolverOptions::default()).is_err());
    assert!(
        ClosedLoopSystem::new(ScaledParams { d1: 0.0, d2: 1.0 }, -1.0, sys.controller).is_err()
    );
}

#[test]
fn classification_thresholds() {
    let sys = lossy_loop();
    let mut traj = integrate(&sys, &[3.0, 1.0, -0.25], 1.0, &SolverOptions::default()).unwrap();
    let known = sys.known_equilibria().unwrap();
    let tol = Tolerances::default();
    assert!(classify_outcome(&traj, &known, &tol).is_converged());
    // Near the point but still moving: not converged.
    traj.final_rate = vec![1e-3, 0.0, 0.0];
    assert_eq!(classify_outcome(&traj, &known, &tol), Outcome::Timeout);
    let last = traj.states.len() - 1;
    traj.states[last] = vec![5e-4, 5e-4, 12.0];
    assert_eq!(
        classify_outcome(&traj, &known, &tol),
        Outcome::OriginCollapse
    );
    traj.halt = Halt::Diverged;
    assert_eq!(classify_outcome(&traj, &known, &tol), Outcome::Diverged);
}

#[test]
fn csv_layout() {
    let traj = integrate(
        &lossy_loop(),
        &[2.5, 1.2, 0.0],
        1.0,
        &SolverOptions::rk4(0.25),
    )
    .unwrap();
    let mut buf = Vec::new();
    write_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], CSV_HEADER);
    assert_eq!(lines.len(), 1 + 5);
    assert!(lines[1].starts_with("0,2.5,1.2,0,"));
    assert!(lines.iter().skip(1).all(|l| l.split(',').count() == 8));

    let ida = ClosedLoopSystem::new(
        ScaledParams::new(0.0, 1.0).unwrap(),
        1.0,
        Controller::IdaK(IdaK::new(4.0).unwrap()),
    )
    .unwrap();
    let traj = integrate(&ida, &[1.0, 1.0], 0.5, &SolverOptions::rk4(0.25)).unwrap();
    let mut buf = Vec::new();
    write_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    // Static law: empty integrator column.
    assert!(text.lines().nth(1).unwrap().starts_with("0,1,1,,"));
}

#[test]
fn extended_csv_layout() {
    let sp = ScaledParams::new(0.0, 1.0).unwrap();
    let law = PidPbc::new(&sp, 1.0, 1.0, 1.0, PidPbcMode::Feedforward).unwrap();
    let sys = ClosedLoopSystem::new(sp, 1.0, Controller::PidPbc(law))
        .unwrap()
        .with_observer(ObserverBlock {
            config: ObserverConfig::default(),
            theta0: Vector2::zeros(),
        })
        .unwrap();
    let x0 = sys
        .initial_state(&[0.5, 0.8, 0.0], Vector2::zeros())
        .unwrap();
    let traj = integrate(&sys, &x0, 1.0, &SolverOptions::rk4(0.5)).unwrap();
    let mut buf = Vec::new();
    write_extended_csv(&traj, &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    let header: Vec<&str> = text.lines().next().unwrap().split(',').collect();
    assert_eq!(header.len(), 8 + EXTENDED_COLUMNS.len());
    assert_eq!(header[8], "xi1");
    assert_eq!(*header.last().unwrap(), "delta_sq_integral");
    let first: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(first.len(), header.len());
    // Phi(0) = I.
    assert_eq!(&first[10..14], &["1", "0", "0", "1"]);
}

#[test]
fn rk4_runs_are_deterministic() {
    let sys = lossy_loop();
    let a = integrate(&sys, &[2.5, 1.2, 0.0], 5.0, &SolverOptions::rk4(1e-3)).unwrap();
    let b = integrate(&sys, &[2.5, 1.2, 0.0], 5.0, &SolverOptions::rk4(1e-3)).unwrap();
    let (mut ca, mut cb) = (Vec::new(), Vec::new());
    write_csv(&a, &mut ca).unwrap();
    write_csv(&b, &mut cb).unwrap();
    assert_eq!(ca, cb);
}
