//! Truncated signed distance volume with running-average integration.

use std::path::Path;

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::Serialize;

use crate::geometry::{Aabb, CameraView};
use crate::io::{write_file, IoError};

// Observations are accumulated as integer multiples of `truncation / QUANTA`
// so that the sum, and hence the fused value, does not depend on the order
// in which cameras are integrated.
const QUANTA: f64 = (1u64 << 24) as f64;

/// Axis-aligned voxel grid of truncated signed distances.
///
/// Values are positive in free space (in front of the observed surface) and
/// negative behind it, matching [`CameraView::srdf`].
#[derive(Debug, Clone, PartialEq)]
pub struct TsdfVolume {
    origin: Point3<f64>,
    voxel_size: f64,
    dims: [usize; 3],
    truncation: f64,
    sums: Vec<i64>,
    weights: Vec<u32>,
}

impl TsdfVolume {
    /// Cubic voxels covering `bounds` padded by `padding` (fraction of the
    /// extent per side); the longest axis gets `resolution` voxels.
    pub fn covering(bounds: &Aabb, resolution: usize, padding: f64, truncation_voxels: f64) -> Self {
        assert!(resolution >= 2, "TSDF resolution must be at least 2");
        let padded = bounds.padded(padding);
        let extent = padded.extent();
        let voxel = extent.max() / resolution as f64;
        let dims = [0, 1, 2].map(|a| ((extent[a] / voxel).ceil() as usize).clamp(2, resolution));
        Self::new(padded.min_point(), voxel, dims, truncation_voxels * voxel)
    }

    /// Empty (fully unobserved) volume. Voxel `(i, j, k)` has its center at
    /// `origin + (i + 0.5, j + 0.5, k + 0.5) * voxel_size`.
    pub fn new(origin: Point3<f64>, voxel_size: f64, dims: [usize; 3], truncation: f64) -> Self {
        assert!(voxel_size > 0.0 && truncation > 0.0);
        let n = dims[0] * dims[1] * dims[2];
        Self {
            origin,
            voxel_size,
            dims,
            truncation,
            sums: vec![0; n],
            weights: vec![0; n],
        }
    }

    /// Volume holding `sdf` (clamped to the truncation band) at every voxel
    /// center, each with weight one.
    pub fn from_fn(
        origin: Point3<f64>,
        voxel_size: f64,
        dims: [usize; 3],
        truncation: f64,
        sdf: impl Fn(&Point3<f64>) -> f64 + Sync,
    ) -> Self {
        let mut vol = Self::new(origin, voxel_size, dims, truncation);
        let quantum = vol.quantum();
        vol.for_each_voxel(|p, sum, weight| {
            *sum = (sdf(&p).clamp(-truncation, truncation) / quantum).round() as i64;
            *weight = 1;
        });
        vol
    }

    pub fn origin(&self) -> Point3<f64> {
        self.origin
    }

    pub fn voxel_size(&self) -> f64 {
        self.voxel_size
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    pub fn truncation(&self) -> f64 {
        self.truncation
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize, k: usize) -> usize {
        i + self.dims[0] * (j + self.dims[1] * k)
    }

    #[inline]
    pub fn center(&self, i: usize, j: usize, k: usize) -> Point3<f64> {
        voxel_center(self.origin, self.voxel_size, i, j, k)
    }

    #[inline]
    pub fn weight(&self, index: usize) -> u32 {
        self.weights[index]
    }

    /// Fused signed distance, `None` for unobserved voxels.
    #[inline]
    pub fn tsdf(&self, index: usize) -> Option<f64> {
        let w = self.weights[index];
        (w > 0).then(|| self.sums[index] as f64 / w as f64 * self.quantum())
    }

    pub fn observed_count(&self) -> usize {
        self.weights.iter().filter(|&&w| w > 0).count()
    }

    fn quantum(&self) -> f64 {
        self.truncation / QUANTA
    }

    fn for_each_voxel(&mut self, f: impl Fn(Point3<f64>, &mut i64, &mut u32) + Sync) {
        let dims = self.dims;
        let slab = dims[0] * dims[1];
        let (origin, size) = (self.origin, self.voxel_size);
        self.sums
            .par_chunks_mut(slab)
            .zip(self.weights.par_chunks_mut(slab))
            .enumerate()
            .for_each(|(k, (sums, weights))| {
                for j in 0..dims[1] {
                    for i in 0..dims[0] {
                        let idx = j * dims[0] + i;
                        f(
                            voxel_center(origin, size, i, j, k),
                            &mut sums[idx],
                            &mut weights[idx],
                        );
                    }
                }
            });
    }

    /// Fuses one depth map. Every voxel whose center has a valid depth lookup
    /// and lies less than the truncation distance behind the surface gets
    /// `clamp(srdf, -tau, tau)` added with weight `weight`.
    pub fn integrate(&mut self, view: &CameraView, weight: u32) {
        assert!(weight > 0, "observation weight must be positive");
        let (tau, quantum) = (self.truncation, self.quantum());
        self.for_each_voxel(|p, sum, w| {
            let Ok(d) = view.srdf(&p) else { return };
            if d <= -tau {
                return;
            }
            *sum += (d.min(tau) / quantum).round() as i64 * weight as i64;
            *w += weight;
        });
    }

    /// Writes `<stem>.raw` (little-endian float32 tsdf, then float32 weights,
    /// x fastest; unobserved voxels hold tsdf 0) and `<stem>.json` describing
    /// the grid.
    pub fn dump(&self, stem: &Path) -> Result<(), IoError> {
        let mut bytes = Vec::with_capacity(self.len() * 8);
        for idx in 0..self.len() {
            bytes.extend_from_slice(&(self.tsdf(idx).unwrap_or(0.0) as f32).to_le_bytes());
        }
        for &w in &self.weights {
            bytes.extend_from_slice(&(w as f32).to_le_bytes());
        }
        write_file(&stem.with_extension("raw"), &bytes)?;

        #[derive(Serialize)]
        struct Header {
            dims: [usize; 3],
            origin: [f64; 3],
            voxel_size: f64,
            truncation: f64,
            layout: &'static str,
        }
        let header = Header {
            dims: self.dims,
            origin: self.origin.coords.into(),
            voxel_size: self.voxel_size,
            truncation: self.truncation,
            layout: "f32le tsdf (x fastest), then f32le weight",
        };
        let mut json = serde_json::to_vec_pretty(&header).expect("header serializes");
        json.push(b'\n');
        write_file(&stem.with_extension("json"), &json)
    }
}

#[inline]
fn voxel_center(origin: Point3<f64>, size: f64, i: usize, j: usize, k: usize) -> Point3<f64> {
    origin + Vector3::new(i as f64 + 0.5, j as f64 + 0.5, k as f64 + 0.5) * size
}
