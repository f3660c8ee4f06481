use thiserror::Error;

use crate::consistency::ConsistencyError;
use crate::geometry::GeometryError;
use crate::io::IoError;
use crate::metrics::MetricsError;
use crate::optimize::OptimizeError;
use crate::synth::SynthError;

/// Any failure of a pipeline step, prefixed with the module it came from.
#[derive(Debug, Error)]
pub enum Error {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(#[from] IoError),
    #[error("geometry: {0}")]
    Geometry(#[from] GeometryError),
    #[error("synth: {0}")]
    Synth(#[from] SynthError),
    #[error("consistency: {0}")]
    Consistency(#[from] ConsistencyError),
    #[error("optimize: {0}")]
    Optimize(#[from] OptimizeError),
    #[error("metrics: {0}")]
    Metrics(#[from] MetricsError),
}

impl Error {
    /// True for problems with the inputs (bad config, missing or malformed
    /// files, inconsistent data) as opposed to failures during computation.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Config(_)
            | Error::Io(_)
            | Error::Geometry(_)
            | Error::Consistency(_)
            | Error::Metrics(MetricsError::InvalidParams(_) | MetricsError::InvalidMesh(_)) => true,
            Error::Synth(e) => !matches!(e, SynthError::Hull(_)),
            Error::Optimize(e) => matches!(
                e,
                OptimizeError::InvalidSchedule(_)
                    | OptimizeError::InvalidGroupSize { .. }
                    | OptimizeError::InvalidGroups(_)
                    | OptimizeError::MissingDepth { .. }
                    | OptimizeError::Geometry(_)
            ),
            Error::Metrics(_) => false,
        }
    }

    /// Process exit code: 2 for validation errors, 3 for runtime failures.
    pub fn exit_code(&self) -> i32 {
        if self.is_validation() {
            2
        } else {
            3
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
