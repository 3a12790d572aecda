use thiserror::Error;

use crate::symgroup::UnitQuaternion;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("symmetry group is not sign-paired")]
    NotSignPaired,

    #[error("no group element maps {0:?} into the fundamental zone")]
    NoFzRepresentative(UnitQuaternion),

    #[error("modified Bessel function I_{order}({x}) overflows f64; use the log-scaled variant")]
    Overflow { order: f64, x: f64 },

    /// Mean resultant length reached 1. The sample mean direction is still
    /// well defined and is carried along so callers can decide a policy.
    #[error("degenerate resultant (length {resultant}); concentration is unbounded")]
    DegenerateResultant {
        resultant: f64,
        mean: Option<UnitQuaternion>,
    },

    #[error("degenerate scatter: Y_p inverse argument {0} outside (0, 1)")]
    DegenerateScatter(f64),

    #[error("log-likelihood became non-finite at iteration {iteration}")]
    NonFiniteLikelihood { iteration: usize },

    #[error("cluster {cluster} is empty")]
    EmptyCluster { cluster: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("rows with norm outside [0.9, 1.1]: {rows:?}")]
    Norm { rows: Vec<usize> },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. } | Error::Norm { .. } => 2,
            Error::Config(_) | Error::InvalidArgument(_) => 4,
            Error::Io(_) | Error::Csv(_) | Error::Json(_) => 1,
            _ => 3,
        }
    }
}
