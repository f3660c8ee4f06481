//! Ground-truth scene generation and depth-map initialization.

mod cameras;
mod hull;
mod import;
mod render;
mod scene;

pub use cameras::{LayoutKind, RigLayout};
pub use hull::{carve, visual_hull_init, HullParams, HullReport, VoxelHull};
pub use import::{import_depth_maps, DepthConvention};
pub use render::{render, render_view};
pub use scene::{
    build_scene, Geometry, GeometryDescription, Scene, SceneDescription, SceneHit, Shape, ShapeDescription,
    Texture,
};

use thiserror::Error;

use crate::geometry::GeometryError;
use crate::io::IoError;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("scene: {0}")]
    Scene(String),
    #[error("camera {camera}: degenerate viewpoint, camera center lies inside a shape")]
    DegenerateViewpoint { camera: usize },
    #[error("visual hull: {0}")]
    Hull(String),
    #[error("camera {camera}: {message}")]
    Import { camera: usize, message: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Io(#[from] IoError),
}
