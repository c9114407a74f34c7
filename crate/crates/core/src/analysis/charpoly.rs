use nalgebra::Complex;
use nalgebra::Matrix3;

pub type Complex64 = Complex<f64>;

/// Boundary band of the Routh-Hurwitz inequalities.
pub const MARGINAL_BAND: f64 = 1e-9;

/// Monic cubic `s^3 + a2 s^2 + a1 s + a0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CharPoly3 {
    pub a0: f64,
    pub a1: f64,
    pub a2: f64,
}

impl CharPoly3 {
    pub const fn new(a0: f64, a1: f64, a2: f64) -> Self {
        Self { a0, a1, a2 }
    }

    /// Coefficients of `det(sI - A)`: `a2 = -tr A`, `a1` the sum of principal
    /// 2x2 minors, `a0 = -det A`.
    pub fn from_matrix(a: &Matrix3<f64>) -> Self {
        let minor = |i: usize, j: usize| a[(i, i)] * a[(j, j)] - a[(i, j)] * a[(j, i)];
        Self {
            a0: -a.determinant(),
            a1: minor(0, 1) + minor(0, 2) + minor(1, 2),
            a2: -a.trace(),
        }
    }

    pub fn eval(&self, s: f64) -> f64 {
        ((s + self.a2) * s + self.a1) * s + self.a0
    }

    fn eval_complex(&self, s: Complex64) -> Complex64 {
        ((s + self.a2) * s + self.a1) * s + self.a0
    }

    /// `a2 a1 - a0`.
    pub fn hurwitz_determinant(&self) -> f64 {
        self.a2 * self.a1 - self.a0
    }

    pub fn is_finite(&self) -> bool {
        self.a0.is_finite() && self.a1.is_finite() && self.a2.is_finite()
    }

    /// All three roots. One real root is found in closed form (Cardano or
    /// the trigonometric form), polished by Newton steps, and deflated; the
    /// remaining quadratic is solved with the cancellation-free formula.
    pub fn roots(&self) -> [Complex64; 3] {
        let r1 = self.real_root();
        let b = self.a2 + r1;
        let c = if r1.abs() > 1.0 && r1 != 0.0 {
            -self.a0 / r1
        } else {
            self.a1 + b * r1
        };
        let [r2, r3] = quadratic_roots(b, c);
        let mut roots = [Complex64::new(r1, 0.0), r2, r3];
        for z in roots.iter_mut().skip(1) {
            *z = self.polish(*z);
        }
        roots
    }

    fn polish(&self, mut z: Complex64) -> Complex64 {
        for _ in 0..3 {
            let p = self.eval_complex(z);
            let dp = (3.0 * z + 2.0 * self.a2) * z + self.a1;
            if dp.norm() == 0.0 {
                break;
            }
            let next = z - p / dp;
            if !next.re.is_finite()
                || !next.im.is_finite()
                || self.eval_complex(next).norm() >= p.norm()
            {
                break;
            }
            z = next;
        }
        z
    }

    fn real_root(&self) -> f64 {
        let (a, b, c) = (self.a2, self.a1, self.a0);
        let shift = a / 3.0;
        let p = b - a * a / 3.0;
        let q = 2.0 * a * a * a / 27.0 - a * b / 3.0 + c;
        let disc = (q / 2.0).powi(2) + (p / 3.0).powi(3);
        let t = if disc >= 0.0 {
            let big = -q.signum() * ((q.abs() / 2.0) + disc.sqrt()).cbrt();
            let big = if q == 0.0 { disc.sqrt().cbrt() } else { big };
            if big == 0.0 {
                0.0
            } else {
                big - p / (3.0 * big)
            }
        } else {
            let m = 2.0 * (-p / 3.0).sqrt();
            let arg = (3.0 * q / (p * m)).clamp(-1.0, 1.0);
            // Largest of the three real roots of the depressed cubic.
            m * (arg.acos() / 3.0).cos()
        };
        let mut s = t - shift;
        for _ in 0..4 {
            let f = self.eval(s);
            let df = (3.0 * s + 2.0 * a) * s + b;
            if df == 0.0 {
                break;
            }
            let next = s - f / df;
            if !next.is_finite() || self.eval(next).abs() >= f.abs() {
                break;
            }
            s = next;
        }
        s
    }
}

/// Roots of `s^2 + b s + c`.
fn quadratic_roots(b: f64, c: f64) -> [Complex64; 2] {
    let disc = b * b - 4.0 * c;
    if disc >= 0.0 {
        let sq = disc.sqrt();
        let q = -0.5 * (b + b.signum() * sq);
        let q = if b == 0.0 { -0.5 * sq } else { q };
        if q == 0.0 {
            return [Complex64::new(0.0, 0.0); 2];
        }
        [Complex64::new(q, 0.0), Complex64::new(c / q, 0.0)]
    } else {
        let re = -0.5 * b;
        let im = 0.5 * (-disc).sqrt();
        [Complex64::new(re, im), Complex64::new(re, -im)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RouthCondition {
    A0Positive,
    A1Positive,
    A2Positive,
    HurwitzDeterminant,
}

impl RouthCondition {
    pub const ALL: [RouthCondition; 4] = [
        RouthCondition::A0Positive,
        RouthCondition::A1Positive,
        RouthCondition::A2Positive,
        RouthCondition::HurwitzDeterminant,
    ];

    pub fn label(self) -> &'static str {
        match self {
            RouthCondition::A0Positive => "a0 > 0",
            RouthCondition::A1Positive => "a1 > 0",
            RouthCondition::A2Positive => "a2 > 0",
            RouthCondition::HurwitzDeterminant => "a2*a1 > a0",
        }
    }

    pub fn value(self, cp: &CharPoly3) -> f64 {
        match self {
            RouthCondition::A0Positive => cp.a0,
            RouthCondition::A1Positive => cp.a1,
            RouthCondition::A2Positive => cp.a2,
            RouthCondition::HurwitzDeterminant => cp.hurwitz_determinant(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Verdict {
    Stable,
    Unstable,
    Marginal,
}

impl Verdict {
    pub fn label(self) -> &'static str {
        match self {
            Verdict::Stable => "stable",
            Verdict::Unstable => "unstable",
            Verdict::Marginal => "marginal",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StabilityReport {
    pub charpoly: CharPoly3,
    pub routh_pass: bool,
    /// First condition that fails outright, or else the first one inside the
    /// marginal band.
    pub failing_condition: Option<RouthCondition>,
    pub eigenvalues: [Complex64; 3],
    pub verdict: Verdict,
}

impl StabilityReport {
    pub fn max_real_part(&self) -> f64 {
        self.eigenvalues
            .iter()
            .map(|z| z.re)
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

pub fn routh_hurwitz(cp: &CharPoly3) -> StabilityReport {
    let mut failed = None;
    let mut marginal = None;
    for cond in RouthCondition::ALL {
        let v = cond.value(cp);
        if v.is_nan() || v < -MARGINAL_BAND {
            failed.get_or_insert(cond);
        } else if v <= MARGINAL_BAND {
            marginal.get_or_insert(cond);
        }
    }
    let verdict = match (failed, marginal) {
        (Some(_), _) => Verdict::Unstable,
        (None, Some(_)) => Verdict::Marginal,
        (None, None) => Verdict::Stable,
    };
    StabilityReport {
        charpoly: *cp,
        routh_pass: verdict == Verdict::Stable,
        failing_condition: failed.or(marginal),
        eigenvalues: cp.roots(),
        verdict,
    }
}
