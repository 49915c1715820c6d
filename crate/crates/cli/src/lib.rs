//! `nlwpi`: configuration, orchestration and artifact emission.

pub mod config;
pub mod output;
pub mod run;

use nlwpi_core::Error;

/// Failure classes with their process exit codes.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("invariant violated: {name}: {detail}")]
    Invariant { name: String, detail: String },
    #[error("{0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Invariant { .. } => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { .. }
            | Error::UnknownFamily(_)
            | Error::ConjugateSignature(_)
            | Error::NotPumpProbe(_)
            | Error::ControlPulseAsFirstOrder => CliError::Config(e.to_string()),
            Error::Invariant { name, detail } => CliError::Invariant { name: name.into(), detail },
            Error::StepUnderflow { .. } => CliError::Invariant { name: "step_size".into(), detail: e.to_string() },
            other => CliError::Invariant { name: "internal".into(), detail: other.to_string() },
        }
    }
}
