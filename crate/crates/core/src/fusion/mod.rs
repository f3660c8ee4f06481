//! Depth-map fusion: bilateral smoothing, TSDF integration, iso-surface
//! extraction and silhouette cleaning.

mod bilateral;
mod clean;
mod marching_cubes;
mod tsdf;

pub use bilateral::bilateral_filter;
pub use clean::{clean_mesh, CleanReport};
pub use marching_cubes::{case_triangle_counts, marching_cubes};
pub use tsdf::TsdfVolume;

use serde::{Deserialize, Serialize};

use crate::geometry::MultiViewRig;
use crate::mesh::TriangleMesh;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FusionParams {
    /// Voxels along the longest axis of the padded scene box.
    pub resolution: usize,
    /// Padding of the scene box, as a fraction of its extent per side.
    pub padding: f64,
    /// Truncation distance in voxel sizes.
    pub truncation_voxels: f64,
    /// Weight of each depth observation.
    pub observation_weight: u32,
    /// Spatial sigma of the bilateral filter, pixels. Zero disables it.
    pub bilateral_sigma_px: f64,
    /// Range sigma of the bilateral filter, fraction of the scene diameter.
    pub bilateral_sigma_range: f64,
    /// Components with fewer triangles than this fraction are dropped.
    pub min_component_fraction: f64,
}

impl Default for FusionParams {
    fn default() -> Self {
        Self {
            resolution: 256,
            padding: 0.05,
            truncation_voxels: 3.0,
            observation_weight: 1,
            bilateral_sigma_px: 2.0,
            bilateral_sigma_range: 0.01,
            min_component_fraction: 0.001,
        }
    }
}

impl FusionParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.resolution < 2 {
            return Err(format!("fusion resolution must be >= 2, got {}", self.resolution));
        }
        if !(self.padding >= 0.0 && self.padding.is_finite()) {
            return Err(format!("fusion padding must be >= 0, got {}", self.padding));
        }
        if !(self.truncation_voxels > 0.0 && self.truncation_voxels.is_finite()) {
            return Err("fusion truncation_voxels must be > 0".into());
        }
        if self.observation_weight == 0 {
            return Err("fusion observation_weight must be >= 1".into());
        }
        if !(self.bilateral_sigma_px >= 0.0 && self.bilateral_sigma_px.is_finite()) {
            return Err("bilateral_sigma_px must be >= 0".into());
        }
        if !(self.bilateral_sigma_range > 0.0 && self.bilateral_sigma_range.is_finite()) {
            return Err("bilateral_sigma_range must be > 0".into());
        }
        if !(0.0..=1.0).contains(&self.min_component_fraction) {
            return Err("min_component_fraction must lie in [0, 1]".into());
        }
        Ok(())
    }
}

/// Result of [`fuse`].
#[derive(Debug, Clone)]
pub struct FusionOutput {
    pub volume: TsdfVolume,
    /// Marching-cubes surface before cleaning.
    pub raw_mesh: TriangleMesh,
    /// Cleaned surface with vertex normals.
    pub mesh: TriangleMesh,
    pub clean: CleanReport,
}

/// Smooths every depth map, fuses them into a TSDF over the rig bounds,
/// extracts the zero level set and cleans it against the silhouettes.
pub fn fuse(rig: &MultiViewRig, params: &FusionParams) -> FusionOutput {
    let mut volume = TsdfVolume::covering(
        &rig.bounds,
        params.resolution,
        params.padding,
        params.truncation_voxels,
    );
    let sigma_r = params.bilateral_sigma_range * rig.diameter();
    for view in &rig.views {
        if params.bilateral_sigma_px > 0.0 {
            let mut smoothed = view.clone();
            smoothed.depth = bilateral_filter(&view.depth, &view.mask, params.bilateral_sigma_px, sigma_r);
            volume.integrate(&smoothed, params.observation_weight);
        } else {
            volume.integrate(view, params.observation_weight);
        }
    }
    let raw_mesh = marching_cubes(&volume);
    let (mut mesh, clean) = clean_mesh(&raw_mesh, rig, params.min_component_fraction);
    mesh.compute_normals();
    FusionOutput {
        volume,
        raw_mesh,
        mesh,
        clean,
    }
}
