use thiserror::Error;

use crate::sim::Trajectory;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    ParameterDomain(String),

    #[error("no assignable equilibrium: d1*d2 must be below 1/(4 y*^2) (margin {margin:e})")]
    NoEquilibrium { margin: f64 },

    #[error("control law undefined at this state: {0}")]
    ControlDomain(String),

    #[error("not applicable: {0}")]
    NotApplicable(String),

    #[error("matrix is not Hurwitz: Routh-Hurwitz condition `{condition}` fails")]
    NotHurwitz { condition: String },

    #[error("Lyapunov solution is not positive definite")]
    NotPositiveDefinite,

    #[error("no admissible level above the floor {floor:e}: degenerate domain of attraction")]
    DegenerateDoa { floor: f64 },

    #[error("step size underflow at tau = {t}: problem too stiff for the explicit integrator")]
    Stiff { t: f64, partial: Box<Trajectory> },

    #[error("invalid state vector: {0}")]
    State(String),
}
