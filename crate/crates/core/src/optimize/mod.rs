//! Depth-map optimization against the group consistency energy.

mod energy;
mod groups;
mod optimizer;
mod sampling;
mod schedule;
#[cfg(test)]
pub(crate) mod test_scenes;

pub use energy::{energy, energy_value, evaluate_sample, EnergyEval, PerSampleEvaluation};
pub use groups::{group_centers, make_groups, CameraGroup};
pub use optimizer::{
    optimize, CameraMoments, EnergyLog, EnergyRecord, OptimizeReport, OptimizerConfig, OptimizerState,
};
pub use sampling::{sample_distances, sample_rays, sample_rays_for, SampleBatch};
pub use schedule::{SamplingSchedule, SigmaDRule};

use thiserror::Error;

use crate::geometry::GeometryError;

#[derive(Debug, Error)]
pub enum OptimizeError {
    #[error("invalid schedule: {0}")]
    InvalidSchedule(String),
    #[error("group size {group_size} invalid for {cameras} cameras (need 2 <= g <= N)")]
    InvalidGroupSize { group_size: usize, cameras: usize },
    #[error("invalid camera groups: {0}")]
    InvalidGroups(String),
    #[error("camera {camera}: foreground pixel {pixel} has no depth")]
    MissingDepth { camera: usize, pixel: usize },
    #[error("non-finite {what} at stage {stage}, epoch {epoch}, group {group}{}", location(.camera, .pixel))]
    NonFinite {
        stage: usize,
        epoch: usize,
        group: usize,
        camera: Option<usize>,
        pixel: Option<usize>,
        what: &'static str,
    },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

fn location(camera: &Option<usize>, pixel: &Option<usize>) -> String {
    match (camera, pixel) {
        (Some(c), Some(p)) => format!(", camera {c}, pixel {p}"),
        (Some(c), None) => format!(", camera {c}"),
        _ => String::new(),
    }
}
