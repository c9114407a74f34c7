use nalgebra::{DMatrix, DVector, Matrix2, Matrix3, SMatrix};

use super::charpoly::{routh_hurwitz, CharPoly3, Verdict};
use crate::error::{Error, Result};

/// Condition number above which a solution is flagged.
pub const ILL_CONDITIONED: f64 = 1e12;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LyapunovSolution<const N: usize> {
    pub p: SMatrix<f64, N, N>,
    /// Max-entry residual of `A^T P + P A + Q`.
    pub residual: f64,
    /// 2-norm condition number of the linear system over the symmetric
    /// entries of `P`.
    pub condition: f64,
    pub ill_conditioned: bool,
}

/// Solves `A^T P + P A = -Q` for symmetric `P` with `A` a Hurwitz 3x3 matrix.
pub fn lyapunov_solve(a: &Matrix3<f64>, q: &Matrix3<f64>) -> Result<LyapunovSolution<3>> {
    let rep = routh_hurwitz(&CharPoly3::from_matrix(a));
    if rep.verdict != Verdict::Stable {
        let condition = rep
            .failing_condition
            .map(|c| c.label().to_string())
            .unwrap_or_else(|| "unknown".into());
        return Err(Error::NotHurwitz { condition });
    }
    solve_symmetric(a, q)
}

/// Two-state variant, Hurwitz iff `tr A < 0` and `det A > 0`.
pub fn lyapunov_solve_2(a: &Matrix2<f64>, q: &Matrix2<f64>) -> Result<LyapunovSolution<2>> {
    if !(a.trace() < 0.0) {
        return Err(Error::NotHurwitz {
            condition: "trace < 0".into(),
        });
    }
    if !(a.determinant() > 0.0) {
        return Err(Error::NotHurwitz {
            condition: "det > 0".into(),
        });
    }
    solve_symmetric(a, q)
}

fn upper_index<const N: usize>() -> Vec<(usize, usize)> {
    (0..N).flat_map(|i| (i..N).map(move |j| (i, j))).collect()
}

fn solve_symmetric<const N: usize>(
    a: &SMatrix<f64, N, N>,
    q: &SMatrix<f64, N, N>,
) -> Result<LyapunovSolution<N>> {
    let idx = upper_index::<N>();
    let m = idx.len();
    let mut sys = DMatrix::<f64>::zeros(m, m);
    for (col, &(i, j)) in idx.iter().enumerate() {
        let mut basis = SMatrix::<f64, N, N>::zeros();
        basis[(i, j)] = 1.0;
        basis[(j, i)] = 1.0;
        let image = a.transpose() * basis + basis * a;
        for (row, &(r, c)) in idx.iter().enumerate() {
            sys[(row, col)] = image[(r, c)];
        }
    }
    let rhs = DVector::from_iterator(m, idx.iter().map(|&(r, c)| -q[(r, c)]));
    let sv = sys.clone().singular_values();
    let smax = sv.max();
    let smin = sv.min();
    let condition = if smin > 0.0 {
        smax / smin
    } else {
        f64::INFINITY
    };
    let sol = sys.lu().solve(&rhs).ok_or_else(|| Error::NotHurwitz {
        condition: "singular Lyapunov operator".into(),
    })?;
    let mut p = SMatrix::<f64, N, N>::zeros();
    for (k, &(i, j)) in idx.iter().enumerate() {
        p[(i, j)] = sol[k];
        p[(j, i)] = sol[k];
    }
    if p.cholesky().is_none() {
        return Err(Error::NotPositiveDefinite);
    }
    let residual = (a.transpose() * p + p * a + q).abs().max();
    Ok(LyapunovSolution {
        p,
        residual,
        condition,
        ill_conditioned: condition > ILL_CONDITIONED,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::pi::pi_jacobian;
    use crate::controllers::PiGains;
    use crate::model::ScaledParams;
    use nalgebra::Vector3;

    #[test]
    fn scalar_and_diagonal_cases() {
        let sol = lyapunov_solve(&(-Matrix3::identity()), &Matrix3::identity()).unwrap();
        assert!((sol.p - Matrix3::<f64>::identity() * 0.5).abs().max() < 1e-15);

        let a = Matrix3::from_diagonal(&Vector3::new(-1.0, -2.0, -3.0));
        let sol = lyapunov_solve(&a, &Matrix3::identity()).unwrap();
        let expected = Matrix3::from_diagonal(&Vector3::new(0.5, 0.25, 1.0 / 6.0));
        assert!((sol.p - expected).abs().max() < 1e-15);
        assert!(!sol.ill_conditioned);
    }

    #[test]
    fn maximal_branch_jacobian() {
        let sp = ScaledParams::new(0.25, 0.75).unwrap();
        let g = PiGains::new(2.0, 1.0, 0.5).unwrap();
        let a = pi_jacobian(&sp, &g, 1.0, [3.0, 1.0, -0.25]);
        let sol = lyapunov_solve(&a, &Matrix3::identity()).unwrap();
        assert!(sol.residual < 1e-9);
        assert_eq!(sol.p, sol.p.transpose());
        assert!(sol.p.symmetric_eigenvalues().min() > 0.0);
        // Back-substitution.
        let back = a.transpose() * sol.p + sol.p * a;
        assert!((back + Matrix3::identity()).abs().max() < 1e-9);
    }

    #[test]
    fn unstable_matrix_is_refused() {
        let sp = ScaledParams::new(0.25, 0.75).unwrap();
        let g = PiGains::new(2.0, 1.0, 0.5).unwrap();
        let a = pi_jacobian(&sp, &g, 1.0, [1.0, 1.0, 0.25]);
        match lyapunov_solve(&a, &Matrix3::identity()) {
            Err(Error::NotHurwitz { condition }) => assert_eq!(condition, "a0 > 0"),
            other => panic!("expected NotHurwitz, got {other:?}"),
        }
        assert!(
            lyapunov_solve_2(&Matrix2::new(1.0, 0.0, 0.0, -2.0), &Matrix2::identity()).is_err()
        );
    }

    #[test]
    fn solution_scales_with_q() {
        let a = Matrix3::new(-1.0, 2.0, 0.0, -2.0, -1.0, 0.5, 0.0, -1.0, -0.3);
        let base = lyapunov_solve(&a, &Matrix3::identity()).unwrap();
        let scaled = lyapunov_solve(&a, &(10.0 * Matrix3::identity())).unwrap();
        assert!((scaled.p - 10.0 * base.p).abs().max() < 1e-12 * scaled.p.abs().max());
    }

    #[test]
    fn two_state_case() {
        let a = Matrix2::new(0.0, -1.5, 1.0, -0.5);
        let sol = lyapunov_solve_2(&a, &Matrix2::identity()).unwrap();
        assert!(sol.residual < 1e-12);
    }
}
