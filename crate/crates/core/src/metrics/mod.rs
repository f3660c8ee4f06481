//! Reconstruction quality: Chamfer accuracy/completeness and depth-map error.
//!
//! The Chamfer value here is the plain mean of accuracy and completeness over
//! all samples. No distance thresholding or observability masking is applied,
//! so the numbers are not comparable with benchmark protocols that filter.

mod kdtree;
mod sample;

pub use kdtree::{brute_force_nearest, KdTree};
pub use sample::sample_mesh;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::MultiViewRig;
use crate::mesh::{PointCloud, TriangleMesh};

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("mesh has no triangles")]
    EmptyMesh,
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("invalid metrics parameters: {0}")]
    InvalidParams(String),
    #[error("camera {camera}: {message}")]
    Mismatch { camera: usize, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsParams {
    /// Points sampled from each mesh.
    pub samples: usize,
    pub seed: u64,
}

impl Default for MetricsParams {
    fn default() -> Self {
        Self {
            samples: 100_000,
            seed: 0,
        }
    }
}

impl MetricsParams {
    pub fn validate(&self) -> Result<(), String> {
        if self.samples == 0 {
            return Err("metrics samples must be >= 1".into());
        }
        Ok(())
    }
}

/// Accuracy, completeness and their mean, in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChamferResult {
    /// Mean distance from reconstruction points to the nearest ground truth point.
    pub accuracy: f64,
    /// Mean distance from ground truth points to the nearest reconstruction point.
    pub completeness: f64,
    /// `(accuracy + completeness) / 2`.
    pub chamfer: f64,
}

/// Mean nearest-neighbour distance from each point of `from` to `to`.
/// Distances are summed in point order, so the result is deterministic.
pub fn mean_nearest_distance(from: &[nalgebra::Point3<f64>], to: &KdTree) -> f64 {
    let d: Vec<f64> = from
        .par_iter()
        .map(|p| to.nearest(p).map(|(_, d2)| d2.sqrt()).unwrap_or(f64::INFINITY))
        .collect();
    d.iter().sum::<f64>() / d.len() as f64
}

/// Chamfer comparison of two non-empty clouds.
pub fn chamfer(recon: &PointCloud, gt: &PointCloud) -> Result<ChamferResult, MetricsError> {
    if recon.is_empty() || gt.is_empty() {
        return Err(MetricsError::EmptyCloud);
    }
    let gt_tree = KdTree::new(gt.points.clone());
    let recon_tree = KdTree::new(recon.points.clone());
    let accuracy = mean_nearest_distance(&recon.points, &gt_tree);
    let completeness = mean_nearest_distance(&gt.points, &recon_tree);
    Ok(ChamferResult {
        accuracy,
        completeness,
        chamfer: (accuracy + completeness) / 2.0,
    })
}

/// Depth error of one camera over the foreground.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CameraDepthError {
    pub camera: usize,
    pub pixels: usize,
    pub mae: f64,
    pub rmse: f64,
}

/// Per-camera depth errors plus the aggregate over all compared pixels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DepthErrorReport {
    pub cameras: Vec<CameraDepthError>,
    pub pixels: usize,
    pub mae: f64,
    pub rmse: f64,
}

/// Compares the depth maps of `estimate` with those of `truth`. Cameras must
/// match in count, size and silhouette; pixels are compared where both maps
/// carry a depth.
pub fn depth_error(estimate: &MultiViewRig, truth: &MultiViewRig) -> Result<DepthErrorReport, MetricsError> {
    if estimate.len() != truth.len() {
        return Err(MetricsError::Mismatch {
            camera: estimate.len().min(truth.len()),
            message: format!("rigs have {} and {} cameras", estimate.len(), truth.len()),
        });
    }
    let mut cameras = Vec::with_capacity(estimate.len());
    let (mut abs_sum, mut sq_sum, mut total) = (0.0, 0.0, 0usize);
    for (camera, (e, t)) in estimate.views.iter().zip(&truth.views).enumerate() {
        if !e.mask.same_shape(&t.mask) {
            return Err(MetricsError::Mismatch {
                camera,
                message: format!(
                    "size {}x{} differs from {}x{}",
                    e.width(),
                    e.height(),
                    t.width(),
                    t.height()
                ),
            });
        }
        if e.mask != t.mask {
            return Err(MetricsError::Mismatch {
                camera,
                message: "foreground masks differ".into(),
            });
        }
        let (mut a, mut s, mut n) = (0.0, 0.0, 0usize);
        for i in e.mask.foreground_indices() {
            if let (Some(de), Some(dt)) = (e.depth.get(i), t.depth.get(i)) {
                let err = de - dt;
                a += err.abs();
                s += err * err;
                n += 1;
            }
        }
        abs_sum += a;
        sq_sum += s;
        total += n;
        let (mae, rmse) = if n > 0 {
            (a / n as f64, (s / n as f64).sqrt())
        } else {
            (0.0, 0.0)
        };
        cameras.push(CameraDepthError {
            camera,
            pixels: n,
            mae,
            rmse,
        });
    }
    let (mae, rmse) = if total > 0 {
        (abs_sum / total as f64, (sq_sum / total as f64).sqrt())
    } else {
        (0.0, 0.0)
    };
    Ok(DepthErrorReport {
        cameras,
        pixels: total,
        mae,
        rmse,
    })
}

/// Everything the evaluation step reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub accuracy: f64,
    pub completeness: f64,
    /// Mean of accuracy and completeness, unfiltered.
    pub chamfer: f64,
    pub recon_samples: usize,
    pub gt_samples: usize,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub depth: Option<DepthErrorReport>,
}

impl MetricsReport {
    pub const CSV_HEADER: &'static str =
        "accuracy,completeness,chamfer,recon_samples,gt_samples,depth_mae,depth_rmse";

    pub fn from_chamfer(c: ChamferResult, recon_samples: usize, gt_samples: usize) -> Self {
        Self {
            accuracy: c.accuracy,
            completeness: c.completeness,
            chamfer: c.chamfer,
            recon_samples,
            gt_samples,
            depth: None,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("report serializes");
        s.push('\n');
        s
    }

    /// One data row matching [`Self::CSV_HEADER`]; depth columns are empty
    /// without a depth comparison.
    pub fn csv_row(&self) -> String {
        let (mae, rmse) = match &self.depth {
            Some(d) => (d.mae.to_string(), d.rmse.to_string()),
            None => (String::new(), String::new()),
        };
        format!(
            "{},{},{},{},{},{},{}",
            self.accuracy, self.completeness, self.chamfer, self.recon_samples, self.gt_samples, mae, rmse
        )
    }

    pub fn to_csv(&self) -> String {
        format!("{}\n{}\n", Self::CSV_HEADER, self.csv_row())
    }
}

/// Samples both meshes with the same seed and compares them, so a mesh
/// compared with itself scores exactly zero.
pub fn evaluate_meshes(
    recon: &TriangleMesh,
    gt: &TriangleMesh,
    params: &MetricsParams,
) -> Result<MetricsReport, MetricsError> {
    params.validate().map_err(MetricsError::InvalidParams)?;
    let r = sample_mesh(recon, params.samples, params.seed)?;
    let g = sample_mesh(gt, params.samples, params.seed)?;
    let c = chamfer(&r, &g)?;
    Ok(MetricsReport::from_chamfer(c, r.len(), g.len()))
}
