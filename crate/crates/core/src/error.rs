use thiserror::Error;

use crate::model::Manifold;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("cannot apply {direction} transition to a packet on the {manifold:?} manifold")]
    IncompatibleTransition { manifold: Manifold, direction: &'static str },

    #[error("manifold mismatch: expected {expected:?}, found {found:?}")]
    ManifoldMismatch { expected: Manifold, found: Manifold },

    #[error("timestamp mismatch at overlap: {bra} fs vs {ket} fs")]
    TimestampMismatch { bra: f64, ket: f64 },

    #[error("the control pulse cannot be used as a first-order interaction")]
    ControlPulseAsFirstOrder,

    #[error("phase signature {0} is served by conjugation, not enumerated directly")]
    ConjugateSignature(String),

    #[error("unknown family `{0}`")]
    UnknownFamily(String),

    #[error("schedule defect in family {family}: {reason}")]
    ScheduleDefect { family: String, reason: String },

    #[error("pulse train is not in pump-probe configuration: {0}")]
    NotPumpProbe(String),

    #[error("invariant violated: {name}: {detail}")]
    Invariant { name: &'static str, detail: String },

    #[error("integrator step size underflow at t = {t} fs")]
    StepUnderflow { t: f64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter { name, reason: reason.into() }
}
