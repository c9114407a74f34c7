//! Stability statements of the PI loop and the zero dynamics as properties
//! over random admissible parameters.

use boostlab_core::analysis::{
    appendix_a_check, pi_charpoly, pi_stability, routh_hurwitz, zero_dynamics, RouthCondition,
    Verdict,
};
use boostlab_core::controllers::{pi_closed_loop_field, PiGains};
use boostlab_core::equilibria::{branch_offset, equilibrium_residual, pi_equilibria, Branch};
use boostlab_core::ScaledParams;
use proptest::prelude::*;

fn lossy() -> impl Strategy<Value = (ScaledParams, f64)> {
    (0.01..2.0f64, 0.2..5.0f64, 0.001..0.999f64)
        .prop_map(|(d1, y, s)| (ScaledParams::new(d1, s / (4.0 * d1 * y * y)).unwrap(), y))
}

fn gains() -> impl Strategy<Value = PiGains> {
    (0.0..10.0f64, 0.01..10.0f64, -2.0..2.0f64)
        .prop_map(|(kp, ki, u0)| PiGains::new(kp, ki, u0).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(512))]

    #[test]
    fn lossless_loop_is_unstable(d2 in 0.05..5.0f64, y in 0.2..5.0f64, g in gains()) {
        let sp = ScaledParams::new(0.0, d2).unwrap();
        let res = pi_stability(&sp, &g, y).unwrap();
        prop_assert_eq!(res.len(), 1);
        let (eq, rep) = &res[0];
        prop_assert_eq!(eq.branch, Branch::Unique);
        prop_assert!((rep.charpoly.a0 + g.ki).abs() < 1e-10);
        prop_assert_eq!(rep.verdict, Verdict::Unstable);
        prop_assert_eq!(rep.failing_condition, Some(RouthCondition::A0Positive));
        prop_assert!(rep.max_real_part() > 0.0);
    }

    #[test]
    fn minimal_branch_is_unstable((sp, y) in lossy(), g in gains()) {
        let r = branch_offset(&sp, y).unwrap();
        let eq = pi_equilibria(&sp, y, &g).unwrap().into_iter().find(|e| e.branch == Branch::MinimalCurrent).unwrap();
        let cp = pi_charpoly(&sp, &g, y, &eq).unwrap();
        prop_assert!((cp.a0 + 2.0 * g.ki * r).abs() < 1e-8);
        prop_assert_eq!(routh_hurwitz(&cp).verdict, Verdict::Unstable);
    }

    #[test]
    fn tuned_maximal_branch_is_stable((sp, y) in lossy(), extra_kp in 0.0..10.0f64, extra_ki in 0.0..10.0f64, u0 in -2.0..2.0f64) {
        let g = PiGains::new(0.5 * sp.d1 * sp.d1 + extra_kp, 5.0 / 16.0 * sp.d1 / (y * y) + extra_ki, u0).unwrap();
        let check = appendix_a_check(&sp, &g, y).unwrap();
        prop_assert!(check.all_conditions);
        let eq = pi_equilibria(&sp, y, &g).unwrap().into_iter().find(|e| e.branch == Branch::MaximalCurrent).unwrap();
        prop_assert_eq!(routh_hurwitz(&pi_charpoly(&sp, &g, y, &eq).unwrap()).verdict, Verdict::Stable);
    }

    #[test]
    fn equilibria_are_at_rest((sp, y) in lossy(), g in gains()) {
        for eq in pi_equilibria(&sp, y, &g).unwrap() {
            prop_assert!(equilibrium_residual(&sp, y, Some(&g), &eq) < 1e-10);
            let f = pi_closed_loop_field(&sp, &g, y, eq.chi().unwrap());
            prop_assert!(f.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-10);
        }
    }

    #[test]
    fn largest_zero_dynamics_root_is_unstable((sp, y) in lossy()) {
        let zd = zero_dynamics(&sp, y).unwrap();
        let top = zd.largest().unwrap();
        prop_assert!(top.slope > 0.0);
        prop_assert_eq!(top.tag, Verdict::Unstable);
    }
}
