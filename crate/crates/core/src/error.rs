use std::path::PathBuf;

use thiserror::Error;

/// Every failure the simulator can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate problem ground state: entries {first} and {second} are within {tolerance:e} of the minimum")]
    DegenerateGroundState {
        first: usize,
        second: usize,
        tolerance: f64,
    },

    #[error("near-degeneracy at lambda = {lambda}: levels {lower} and {upper} separated by {gap:e}")]
    NearDegeneracy {
        lambda: f64,
        lower: usize,
        upper: usize,
        gap: f64,
    },

    #[error("level ordering violated at lambda = {lambda}: E1 - E0 = {gap:e}")]
    OrderingViolation { lambda: f64, gap: f64 },

    #[error("invalid state: {0}")]
    InvalidState(String),

    #[error("integration failure: {0}")]
    IntegrationFailure(String),

    #[error("target success probability {target} not reached below T = {cap:e}")]
    UnreachableTarget { target: f64, cap: f64 },

    #[error("power-law fit needs at least 3 distinct qubit counts, got {0}")]
    FitUnderdetermined(usize),

    #[error("{path}:{line}: {message}")]
    Format {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("usage: {0}")]
    Usage(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status for the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) | Error::InvalidArgument(_) | Error::FitUnderdetermined(_) => 2,
            Error::Io { .. } | Error::Format { .. } => 4,
            _ => 3,
        }
    }

    /// Numerical failures that exclude a single instance from an ensemble
    /// rather than aborting the whole experiment.
    pub fn is_instance_exclusion(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGroundState { .. }
                | Error::NearDegeneracy { .. }
                | Error::UnreachableTarget { .. }
                | Error::IntegrationFailure(_)
        )
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
