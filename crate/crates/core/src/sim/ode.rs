//! Integrators: fixed-step classical RK4, adaptive Dormand-Prince 5(4)
//! with its 4th-order continuous extension, and a Rosenbrock 2(3) method
//! for runs whose fast mode stiffens as the state grows.

use nalgebra::{DMatrix, DVector};

use crate::error::Result;

pub trait OdeSystem {
    fn dim(&self) -> usize;
    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()>;
}

impl<F> OdeSystem for (usize, F)
where
    F: Fn(f64, &[f64], &mut [f64]) -> Result<()>,
{
    fn dim(&self) -> usize {
        self.0
    }

    fn rhs(&self, t: f64, x: &[f64], dx: &mut [f64]) -> Result<()> {
        (self.1)(t, x, dx)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    Rk4 {
        h: f64,
    },
    Rk45 {
        rtol: f64,
        atol: f64,
    },
    /// Linearly implicit Rosenbrock 2(3) for stiff stretches, with a
    /// finite-difference Jacobian.
    Rosenbrock {
        rtol: f64,
        atol: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub method: Method,
    /// Integration halts once the state norm exceeds this.
    pub max_norm: f64,
    /// Adaptive steps below this are reported as step-size underflow.
    pub h_min: f64,
    /// Upper bound on adaptive steps; `0` means unbounded.
    pub h_max: f64,
    pub max_steps: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            method: Method::Rk45 {
                rtol: 1e-8,
                atol: 1e-8,
            },
            max_norm: 1e6,
            h_min: 1e-12,
            h_max: 0.0,
            max_steps: 2_000_000,
        }
    }
}

impl SolverOptions {
    pub fn rk4(h: f64) -> Self {
        Self {
            method: Method::Rk4 { h },
            ..Self::default()
        }
    }

    pub fn rk45(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rk45 { rtol, atol },
            ..Self::default()
        }
    }

    pub fn rosenbrock(rtol: f64, atol: f64) -> Self {
        Self {
            method: Method::Rosenbrock { rtol, atol },
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Halt {
    Completed,
    /// State norm passed `max_norm` or became non-finite.
    Diverged,
    StepUnderflow,
    StepLimit,
}

/// Continuous extension over one accepted adaptive step.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseSegment {
    pub t0: f64,
    pub h: f64,
    coeffs: [Vec<f64>; 5],
}

impl DenseSegment {
    pub fn t1(&self) -> f64 {
        self.t0 + self.h
    }

    pub fn eval(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [c1, c2, c3, c4, c5] = &self.coeffs;
        (0..c1.len())
            .map(|i| c1[i] + th * (c2[i] + th1 * (c3[i] + th * (c4[i] + th1 * c5[i]))))
            .collect()
    }

    /// Exact time derivative of the interpolant.
    pub fn derivative(&self, t: f64) -> Vec<f64> {
        let th = (t - self.t0) / self.h;
        let th1 = 1.0 - th;
        let [_, c2, c3, c4, c5] = &self.coeffs;
        (0..c2.len())
            .map(|i| {
                let a = c4[i] + th1 * c5[i];
                let b = c3[i] + th * a;
                let db = a - th * c5[i];
                let c = c2[i] + th1 * b;
                let dc = -b + th1 * db;
                (c + th * dc) / self.h
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    /// One segment per accepted adaptive step; empty for fixed-step runs.
    pub dense: Vec<DenseSegment>,
    pub halt: Halt,
}

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

fn out_of_bounds(x: &[f64], max_norm: f64) -> bool {
    let n = norm(x);
    !n.is_finite() || n > max_norm
}

pub fn solve<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    opts: &SolverOptions,
) -> Result<OdeSolution> {
    match opts.method {
        Method::Rk4 { h } => rk4(sys, x0, t_end, h, opts),
        Method::Rk45 { rtol, atol } => dopri5(sys, x0, t_end, rtol, atol, opts),
        Method::Rosenbrock { rtol, atol } => rosenbrock23(sys, x0, t_end, rtol, atol, opts),
    }
}

fn axpy(out: &mut [f64], x: &[f64], terms: &[(f64, &[f64])], h: f64) {
    for i in 0..out.len() {
        let mut acc = 0.0;
        for (c, k) in terms {
            acc += c * k[i];
        }
        out[i] = x[i] + h * acc;
    }
}

fn rk4<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    h: f64,
    opts: &SolverOptions,
) -> Result<OdeSolution> {
    let n = sys.dim();
    let steps = (t_end / h).ceil().max(1.0) as usize;
    let mut times = Vec::with_capacity(steps + 1);
    let mut states = Vec::with_capacity(steps + 1);
    let mut x = x0.to_vec();
    times.push(0.0);
    states.push(x.clone());
    let (mut k1, mut k2, mut k3, mut k4, mut tmp) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut halt = if out_of_bounds(&x, opts.max_norm) {
        Halt::Diverged
    } else {
        Halt::Completed
    };
    for step in 0..steps {
        if halt != Halt::Completed {
            break;
        }
        let t = step as f64 * h;
        let dt = if step + 1 == steps { t_end - t } else { h };
        sys.rhs(t, &x, &mut k1)?;
        axpy(&mut tmp, &x, &[(0.5, &k1)], dt);
        sys.rhs(t + 0.5 * dt, &tmp, &mut k2)?;
        axpy(&mut tmp, &x, &[(0.5, &k2)], dt);
        sys.rhs(t + 0.5 * dt, &tmp, &mut k3)?;
        axpy(&mut tmp, &x, &[(1.0, &k3)], dt);
        sys.rhs(t + dt, &tmp, &mut k4)?;
        for i in 0..n {
            x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        times.push(if step + 1 == steps { t_end } else { t + dt });
        states.push(x.clone());
        if out_of_bounds(&x, opts.max_norm) {
            halt = Halt::Diverged;
        }
    }
    Ok(OdeSolution {
        times,
        states,
        dense: Vec::new(),
        halt,
    })
}

// Dormand-Prince 5(4) tableau.
const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;
const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const A71: f64 = 35.0 / 384.0;
const A73: f64 = 500.0 / 1113.0;
const A74: f64 = 125.0 / 192.0;
const A75: f64 = -2187.0 / 6784.0;
const A76: f64 = 11.0 / 84.0;
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;
const D1: f64 = -12715105075.0 / 11282082432.0;
const D3: f64 = 87487479700.0 / 32700410799.0;
const D4: f64 = -10690763975.0 / 1880347072.0;
const D5: f64 = 701980252875.0 / 199316789632.0;
const D6: f64 = -1453857185.0 / 822651844.0;
const D7: f64 = 69997945.0 / 29380423.0;

fn dopri5<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
    opts: &SolverOptions,
) -> Result<OdeSolution> {
    let n = sys.dim();
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut dense = Vec::new();
    if out_of_bounds(&x, opts.max_norm) {
        return Ok(OdeSolution {
            times,
            states,
            dense,
            halt: Halt::Diverged,
        });
    }
    let h_max = if opts.h_max > 0.0 { opts.h_max } else { t_end };

    let mut k1 = vec![0.0; n];
    let (mut k2, mut k3, mut k4, mut k5, mut k6, mut k7) = (
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
        vec![0.0; n],
    );
    let mut tmp = vec![0.0; n];
    let mut x_new = vec![0.0; n];
    sys.rhs(t, &x, &mut k1)?;

    // Initial step from the derivative scale.
    let sc: Vec<f64> = x.iter().map(|v| atol + rtol * v.abs()).collect();
    let d0 = (x.iter().zip(&sc).map(|(v, s)| (v / s).powi(2)).sum::<f64>() / n as f64).sqrt();
    let d1 = (k1
        .iter()
        .zip(&sc)
        .map(|(v, s)| (v / s).powi(2))
        .sum::<f64>()
        / n as f64)
        .sqrt();
    let mut h = if d0 < 1e-5 || d1 < 1e-5 {
        1e-6
    } else {
        0.01 * d0 / d1
    };
    h = h.min(h_max).min(t_end);

    let mut accepted = 0usize;
    let mut last_rejected = false;
    let mut halt = Halt::Completed;
    while t < t_end {
        if accepted >= opts.max_steps {
            halt = Halt::StepLimit;
            break;
        }
        if h < opts.h_min {
            halt = Halt::StepUnderflow;
            break;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        axpy(&mut tmp, &x, &[(A21, &k1)], h);
        sys.rhs(t + C2 * h, &tmp, &mut k2)?;
        axpy(&mut tmp, &x, &[(A31, &k1), (A32, &k2)], h);
        sys.rhs(t + C3 * h, &tmp, &mut k3)?;
        axpy(&mut tmp, &x, &[(A41, &k1), (A42, &k2), (A43, &k3)], h);
        sys.rhs(t + C4 * h, &tmp, &mut k4)?;
        axpy(
            &mut tmp,
            &x,
            &[(A51, &k1), (A52, &k2), (A53, &k3), (A54, &k4)],
            h,
        );
        sys.rhs(t + C5 * h, &tmp, &mut k5)?;
        axpy(
            &mut tmp,
            &x,
            &[(A61, &k1), (A62, &k2), (A63, &k3), (A64, &k4), (A65, &k5)],
            h,
        );
        sys.rhs(t + h, &tmp, &mut k6)?;
        axpy(
            &mut x_new,
            &x,
            &[(A71, &k1), (A73, &k3), (A74, &k4), (A75, &k5), (A76, &k6)],
            h,
        );
        sys.rhs(t + h, &x_new, &mut k7)?;

        let mut err = 0.0;
        for i in 0..n {
            let e =
                h * (E1 * k1[i] + E3 * k3[i] + E4 * k4[i] + E5 * k5[i] + E6 * k6[i] + E7 * k7[i]);
            let s = atol + rtol * x[i].abs().max(x_new[i].abs());
            err += (e / s).powi(2);
        }
        let err = (err / n as f64).sqrt();
        if !err.is_finite() {
            h *= 0.2;
            last_rejected = true;
            continue;
        }

        if err <= 1.0 {
            let ydiff: Vec<f64> = (0..n).map(|i| x_new[i] - x[i]).collect();
            let bspl: Vec<f64> = (0..n).map(|i| h * k1[i] - ydiff[i]).collect();
            let c4: Vec<f64> = (0..n).map(|i| ydiff[i] - h * k7[i] - bspl[i]).collect();
            let c5: Vec<f64> = (0..n)
                .map(|i| {
                    h * (D1 * k1[i]
                        + D3 * k3[i]
                        + D4 * k4[i]
                        + D5 * k5[i]
                        + D6 * k6[i]
                        + D7 * k7[i])
                })
                .collect();
            dense.push(DenseSegment {
                t0: t,
                h,
                coeffs: [x.clone(), ydiff, bspl, c4, c5],
            });
            t = if last { t_end } else { t + h };
            std::mem::swap(&mut x, &mut x_new);
            std::mem::swap(&mut k1, &mut k7);
            times.push(t);
            states.push(x.clone());
            accepted += 1;
            if out_of_bounds(&x, opts.max_norm) {
                halt = Halt::Diverged;
                break;
            }
            let mut fac = 0.9 * err.max(1e-10).powf(-0.2);
            fac = fac.clamp(0.2, 10.0);
            if last_rejected {
                fac = fac.min(1.0);
            }
            last_rejected = false;
            h = (h * fac).min(h_max);
        } else {
            let fac = (0.9 * err.powf(-0.2)).max(0.2);
            h *= fac;
            last_rejected = true;
        }
    }
    Ok(OdeSolution {
        times,
        states,
        dense,
        halt,
    })
}

fn rms_error(err: &[f64], x: &[f64], x_new: &[f64], rtol: f64, atol: f64) -> f64 {
    let n = err.len();
    let sum: f64 = (0..n)
        .map(|i| (err[i] / (atol + rtol * x[i].abs().max(x_new[i].abs()))).powi(2))
        .sum();
    (sum / n as f64).sqrt()
}

/// Finite-difference Jacobian, one forward difference per column.
fn jacobian<S: OdeSystem + ?Sized>(sys: &S, t: f64, x: &[f64], f0: &[f64]) -> Result<DMatrix<f64>> {
    let n = x.len();
    let mut jac = DMatrix::zeros(n, n);
    let mut xp = x.to_vec();
    let mut fp = vec![0.0; n];
    for j in 0..n {
        let dx = f64::EPSILON.sqrt() * x[j].abs().max(1.0);
        xp[j] = x[j] + dx;
        sys.rhs(t, &xp, &mut fp)?;
        for i in 0..n {
            jac[(i, j)] = (fp[i] - f0[i]) / dx;
        }
        xp[j] = x[j];
    }
    Ok(jac)
}

fn rosenbrock23<S: OdeSystem + ?Sized>(
    sys: &S,
    x0: &[f64],
    t_end: f64,
    rtol: f64,
    atol: f64,
    opts: &SolverOptions,
) -> Result<OdeSolution> {
    let n = sys.dim();
    let d = 1.0 / (2.0 + std::f64::consts::SQRT_2);
    let e32 = 6.0 + std::f64::consts::SQRT_2;
    let mut t = 0.0;
    let mut x = x0.to_vec();
    let mut times = vec![0.0];
    let mut states = vec![x.clone()];
    let mut dense = Vec::new();
    if out_of_bounds(&x, opts.max_norm) {
        return Ok(OdeSolution {
            times,
            states,
            dense,
            halt: Halt::Diverged,
        });
    }
    let h_max = if opts.h_max > 0.0 { opts.h_max } else { t_end };
    let mut f0 = vec![0.0; n];
    let mut f1 = vec![0.0; n];
    let mut f2 = vec![0.0; n];
    let mut tmp = vec![0.0; n];
    sys.rhs(t, &x, &mut f0)?;
    let mut jac = jacobian(sys, t, &x, &f0)?;
    let mut h = (rtol.cbrt() * 0.1).min(h_max).min(t_end);
    let mut accepted = 0usize;
    let mut halt = Halt::Completed;
    while t < t_end {
        if accepted >= opts.max_steps {
            halt = Halt::StepLimit;
            break;
        }
        if h < opts.h_min {
            halt = Halt::StepUnderflow;
            break;
        }
        let last = t + h >= t_end;
        if last {
            h = t_end - t;
        }
        let w = DMatrix::identity(n, n) - &jac * (h * d);
        let Some(lu) = Some(w.lu()).filter(|lu| lu.is_invertible()) else {
            h *= 0.5;
            continue;
        };
        let solve = |rhs: Vec<f64>| lu.solve(&DVector::from_vec(rhs)).expect("invertible");
        let k1 = solve(f0.clone());
        axpy(&mut tmp, &x, &[(0.5, k1.as_slice())], h);
        sys.rhs(t + 0.5 * h, &tmp, &mut f1)?;
        let r2: Vec<f64> = (0..n).map(|i| f1[i] - k1[i]).collect();
        let k2 = solve(r2) + &k1;
        let x_new: Vec<f64> = (0..n).map(|i| x[i] + h * k2[i]).collect();
        sys.rhs(t + h, &x_new, &mut f2)?;
        let r3: Vec<f64> = (0..n)
            .map(|i| f2[i] - e32 * (k2[i] - f1[i]) - 2.0 * (k1[i] - f0[i]))
            .collect();
        let k3 = solve(r3);
        let est: Vec<f64> = (0..n)
            .map(|i| h / 6.0 * (k1[i] - 2.0 * k2[i] + k3[i]))
            .collect();
        let err = rms_error(&est, &x, &x_new, rtol, atol);
        if !err.is_finite() || err > 1.0 {
            let fac = if err.is_finite() {
                (0.8 * err.powf(-1.0 / 3.0)).max(0.2)
            } else {
                0.2
            };
            h *= fac;
            continue;
        }
        // y(t0 + s h) = y + s (A + B) - s (1 - s) B with A, B from the
        // quadratic continuous extension.
        let scale = h / (1.0 - 2.0 * d);
        let b: Vec<f64> = (0..n).map(|i| scale * (k2[i] - k1[i])).collect();
        let a: Vec<f64> = (0..n).map(|i| scale * (k1[i] - 2.0 * d * k2[i])).collect();
        dense.push(DenseSegment {
            t0: t,
            h,
            coeffs: [
                x.clone(),
                (0..n).map(|i| a[i] + b[i]).collect(),
                b.iter().map(|v| -v).collect(),
                vec![0.0; n],
                vec![0.0; n],
            ],
        });
        t = if last { t_end } else { t + h };
        x = x_new;
        std::mem::swap(&mut f0, &mut f2);
        times.push(t);
        states.push(x.clone());
        accepted += 1;
        if out_of_bounds(&x, opts.max_norm) {
            halt = Halt::Diverged;
            break;
        }
        jac = jacobian(sys, t, &x, &f0)?;
        let fac = (0.8 * err.max(1e-10).powf(-1.0 / 3.0)).clamp(0.2, 5.0);
        h = (h * fac).min(h_max);
    }
    Ok(OdeSolution {
        times,
        states,
        dense,
        halt,
    })
}
