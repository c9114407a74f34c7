//! Sampled estimate of a quadratic domain of attraction
//! `{x : (x - x_eq)^T P (x - x_eq) <= rho}`.
//!
//! The largest level `rho` is found by bisection in log scale such that the
//! Lyapunov derivative `2 (x - x_eq)^T P f(x)` is negative at every sample of
//! the level set. Directions come from a deterministic low-discrepancy
//! lattice on the unit sphere (Fibonacci lattice in 3-D, uniform angles in
//! 2-D), so estimates are reproducible. Levels are searched relative to
//! `tr(P)/N`, which makes the accepted region invariant under `Q -> c Q`.

use nalgebra::{Matrix3, SMatrix, SVector};

use crate::controllers::{pi_closed_loop_field, PiGains};
use crate::equilibria::{pi_equilibria, Branch};
use crate::error::{Error, Result};
use crate::model::ScaledParams;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaOptions {
    pub samples: usize,
    pub iterations: usize,
    /// Multiplier applied to the bisection result.
    pub safety: f64,
    /// Smallest normalised level tried.
    pub floor: f64,
    /// Largest normalised level tried.
    pub ceiling: f64,
}

impl Default for DoaOptions {
    fn default() -> Self {
        Self {
            samples: 4096,
            iterations: 40,
            safety: 0.9,
            floor: 1e-8,
            ceiling: 1e6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoaEstimate<const N: usize> {
    pub p: SMatrix<f64, N, N>,
    pub center: SVector<f64, N>,
    pub rho: f64,
    pub sample_count: usize,
    /// Samples with nonnegative derivative at the smallest rejected level
    /// (zero when the ceiling was accepted).
    pub violation_count: usize,
}

impl<const N: usize> DoaEstimate<N> {
    pub fn level(&self, x: &SVector<f64, N>) -> f64 {
        let d = x - self.center;
        d.dot(&(self.p * d))
    }

    pub fn contains(&self, x: &SVector<f64, N>) -> bool {
        self.level(x) <= self.rho
    }

    /// `count` points on the boundary `V = rho` spread by the same lattice
    /// as the estimator.
    pub fn boundary_points(&self, count: usize) -> Result<Vec<SVector<f64, N>>> {
        let dirs = level_directions(&self.p, count)?;
        let s = self.rho.sqrt();
        Ok(dirs.into_iter().map(|d| self.center + s * d).collect())
    }
}

/// Deterministic unit vectors in `N` dimensions.
pub fn unit_sphere_lattice<const N: usize>(count: usize) -> Result<Vec<SVector<f64, N>>> {
    let n = count.max(1);
    match N {
        2 => Ok((0..n)
            .map(|i| {
                let phi = std::f64::consts::TAU * (i as f64 + 0.5) / n as f64;
                SVector::<f64, N>::from_iterator([phi.cos(), phi.sin()])
            })
            .collect()),
        3 => {
            let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
            Ok((0..n)
                .map(|i| {
                    let z = 1.0 - (2.0 * i as f64 + 1.0) / n as f64;
                    let rad = (1.0 - z * z).max(0.0).sqrt();
                    let phi = golden * i as f64;
                    SVector::<f64, N>::from_iterator([rad * phi.cos(), rad * phi.sin(), z])
                })
                .collect())
        }
        _ => Err(Error::NotApplicable(format!(
            "no sphere lattice for dimension {N}"
        ))),
    }
}

/// Directions `d` with `d^T P d = 1`.
fn level_directions<const N: usize>(
    p: &SMatrix<f64, N, N>,
    count: usize,
) -> Result<Vec<SVector<f64, N>>> {
    let chol = p.cholesky().ok_or(Error::NotPositiveDefinite)?;
    let l_t = chol.l().transpose();
    unit_sphere_lattice::<N>(count)?
        .into_iter()
        .map(|z| {
            l_t.solve_upper_triangular(&z)
                .ok_or(Error::NotPositiveDefinite)
        })
        .collect()
}

/// Largest sampled level of `V(x) = (x - center)^T P (x - center)` on which
/// the derivative along `field` is negative. Field errors count as
/// violations.
pub fn estimate_region<const N: usize, F>(
    field: F,
    center: SVector<f64, N>,
    p: &SMatrix<f64, N, N>,
    opts: &DoaOptions,
) -> Result<DoaEstimate<N>>
where
    F: Fn(&SVector<f64, N>) -> Result<SVector<f64, N>>,
{
    let dirs = level_directions(p, opts.samples)?;
    let scale = p.trace() / N as f64;
    let violations = |level: f64| -> usize {
        let s = (level * scale).sqrt();
        dirs.iter()
            .filter(|d| {
                let delta = *d * s;
                match field(&(center + delta)) {
                    Ok(f) => !(2.0 * delta.dot(&(p * f)) < 0.0),
                    Err(_) => true,
                }
            })
            .count()
    };

    if violations(opts.floor) > 0 {
        return Err(Error::DegenerateDoa { floor: opts.floor });
    }
    let top = violations(opts.ceiling);
    let (accepted, violation_count) = if top == 0 {
        (opts.ceiling, 0)
    } else {
        let (mut lo, mut hi, mut hi_count) = (opts.floor.ln(), opts.ceiling.ln(), top);
        for _ in 0..opts.iterations {
            let mid = 0.5 * (lo + hi);
            match violations(mid.exp()) {
                0 => lo = mid,
                v => {
                    hi = mid;
                    hi_count = v;
                }
            }
        }
        (lo.exp(), hi_count)
    };
    Ok(DoaEstimate {
        p: *p,
        center,
        rho: opts.safety * accepted * scale,
        sample_count: dirs.len(),
        violation_count,
    })
}

/// Domain of attraction of the maximal-current PI equilibrium.
pub fn estimate_doa(
    sp: &ScaledParams,
    g: &PiGains,
    y_star: f64,
    p: &Matrix3<f64>,
    opts: &DoaOptions,
) -> Result<DoaEstimate<3>> {
    let eq = pi_equilibria(sp, y_star, g)?
        .into_iter()
        .find(|e| e.branch == Branch::MaximalCurrent)
        .ok_or_else(|| Error::NotApplicable("no maximal-current equilibrium (d1 = 0)".into()))?;
    let center = SVector::<f64, 3>::from(eq.chi().expect("PI equilibrium"));
    estimate_region(
        |x| {
            Ok(SVector::<f64, 3>::from(pi_closed_loop_field(
                sp,
                g,
                y_star,
                [x[0], x[1], x[2]],
            )))
        },
        center,
        p,
        opts,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::lyapunov::lyapunov_solve;
    use crate::analysis::pi::pi_jacobian;
    use nalgebra::Vector3;

    fn setup() -> (ScaledParams, PiGains, Matrix3<f64>) {
        let sp = ScaledParams::new(0.25, 0.75).unwrap();
        let g = PiGains::new(2.0, 1.0, 0.5).unwrap();
        let a = pi_jacobian(&sp, &g, 1.0, [3.0, 1.0, -0.25]);
        (sp, g, a)
    }

    #[test]
    fn lattice_is_on_unit_sphere() {
        for v in unit_sphere_lattice::<3>(257).unwrap() {
            assert!((v.norm() - 1.0).abs() < 1e-14);
        }
        let pts = unit_sphere_lattice::<3>(4096).unwrap();
        let mean: Vector3<f64> = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
        assert!(mean.norm() < 1e-3);
        assert!(unit_sphere_lattice::<4>(8).is_err());
    }

    #[test]
    fn linear_field_accepts_everything() {
        let a = Matrix3::new(-1.0, 2.0, 0.0, -2.0, -1.0, 0.0, 0.0, 0.0, -3.0);
        let sol = lyapunov_solve(&a, &Matrix3::identity()).unwrap();
        let opts = DoaOptions::default();
        let est = estimate_region(|x| Ok(a * x), Vector3::zeros(), &sol.p, &opts).unwrap();
        let scale = sol.p.trace() / 3.0;
        assert!((est.rho - opts.safety * opts.ceiling * scale).abs() < 1e-9 * est.rho);
        assert_eq!(est.violation_count, 0);
    }

    #[test]
    fn maximal_branch_region_is_nontrivial() {
        let (sp, g, a) = setup();
        let sol = lyapunov_solve(&a, &Matrix3::identity()).unwrap();
        let est = estimate_doa(&sp, &g, 1.0, &sol.p, &DoaOptions::default()).unwrap();
        assert!(est.rho > 0.0);
        assert_eq!(est.sample_count, 4096);
        assert!(est.violation_count > 0);
        for x in est.boundary_points(64).unwrap() {
            assert!((est.level(&x) - est.rho).abs() < 1e-9 * est.rho);
        }
    }

    #[test]
    fn region_is_invariant_under_q_scaling() {
        let (sp, g, a) = setup();
        let base = lyapunov_solve(&a, &Matrix3::identity()).unwrap();
        let scaled = lyapunov_solve(&a, &(10.0 * Matrix3::identity())).unwrap();
        let opts = DoaOptions::default();
        let e1 = estimate_doa(&sp, &g, 1.0, &base.p, &opts).unwrap();
        let e2 = estimate_doa(&sp, &g, 1.0, &scaled.p, &opts).unwrap();
        assert!((e2.rho / e1.rho - 10.0).abs() < 1e-6);
        for x in e1.boundary_points(32).unwrap() {
            assert!((e2.level(&x) / e2.rho - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn diverging_field_is_degenerate() {
        let p = Matrix3::identity();
        let res = estimate_region(|x| Ok(*x), Vector3::zeros(), &p, &DoaOptions::default());
        assert!(matches!(res, Err(Error::DegenerateDoa { .. })));
    }
}
