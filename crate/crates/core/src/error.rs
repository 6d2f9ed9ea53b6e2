use std::path::PathBuf;

use thiserror::Error;

use crate::kinematics::Triangle;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid link set: {0}")]
    InvalidLinks(String),

    #[error("geometry infeasible: triangle {triangle} cannot close (cosine argument {argument:.15})")]
    GeometryInfeasible { triangle: Triangle, argument: f64 },

    #[error("target knee angle {target_deg} deg outside achievable range [{min_deg}, {max_deg}]")]
    TargetOutOfRange {
        target_deg: f64,
        min_deg: f64,
        max_deg: f64,
    },

    #[error("invalid bounds for {key}: {reason}")]
    InvalidBounds { key: String, reason: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no strictly feasible start point found (max constraint value {max_violation:e})")]
    InfeasibleStartUnrecoverable { max_violation: f64 },

    #[error("no feasible grid point at resolution {resolution}")]
    NoFeasibleGridPoint { resolution: usize },

    #[error("config {path}:{line}: {reason}")]
    Config {
        path: String,
        line: usize,
        reason: String,
    },

    #[error("malformed marker header: expected `{expected}`, found `{found}`")]
    MalformedHeader { expected: String, found: String },

    #[error("too few samples: {found} (need at least {required})")]
    TooFewSamples { found: usize, required: usize },

    #[error("time not strictly increasing at row {row} (t = {t})")]
    NonMonotonicTime { row: usize, t: f64 },

    #[error("series do not overlap in normalised progress")]
    NoOverlap,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error on {path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn csv(path: impl Into<PathBuf>, source: csv::Error) -> Self {
        Error::Csv {
            path: path.into(),
            source,
        }
    }
}
