//! Depth initialization from externally computed depth maps.

use serde::{Deserialize, Serialize};

use crate::geometry::{DepthMap, MultiViewRig};
use crate::io::FloatGrid;

use super::SynthError;

/// How imported depth values are measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DepthConvention {
    /// Euclidean distance along the pixel ray (the internal convention).
    #[default]
    RayDistance,
    /// Camera-space z coordinate; converted on import.
    Planar,
}

/// Replaces each view's depth with the matching grid. Background entries are
/// dropped using the view's mask; every foreground value must be finite and
/// positive.
pub fn import_depth_maps(
    rig: &mut MultiViewRig,
    grids: &[FloatGrid],
    convention: DepthConvention,
) -> Result<(), SynthError> {
    if grids.len() != rig.views.len() {
        return Err(SynthError::Scene(format!(
            "{} depth maps supplied for {} cameras",
            grids.len(),
            rig.views.len()
        )));
    }
    let mut imported = Vec::with_capacity(grids.len());
    for (j, (view, grid)) in rig.views.iter().zip(grids).enumerate() {
        let (w, h) = (view.width(), view.height());
        if grid.width != w || grid.height != h {
            return Err(SynthError::Import {
                camera: j,
                message: format!(
                    "depth map is {}x{}, camera expects {w}x{h}",
                    grid.width, grid.height
                ),
            });
        }
        let mut depth = DepthMap::empty(w, h);
        for i in view.mask.foreground_indices() {
            let raw = grid.data[i] as f64;
            let d = match convention {
                DepthConvention::RayDistance => raw,
                DepthConvention::Planar => {
                    let (x, y) = (i % w, i / w);
                    raw * view.camera.ray_to_planar_factor(x as f64, y as f64)
                }
            };
            if !(d.is_finite() && d > 0.0) {
                return Err(SynthError::Import {
                    camera: j,
                    message: format!("pixel ({}, {}) has invalid depth {raw}", i % w, i / w),
                });
            }
            depth.set(i, d);
        }
        imported.push(depth);
    }
    for (view, depth) in rig.views.iter_mut().zip(imported) {
        view.depth = depth;
    }
    Ok(())
}
