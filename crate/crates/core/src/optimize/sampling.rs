//! Sample placement along foreground pixel rays.

use rayon::prelude::*;

use super::{CameraGroup, OptimizeError};
use crate::geometry::{MultiViewRig, RaySample};

/// Samples of a camera group, stored ray-major: the samples of ray `r`
/// occupy `samples[r * per_ray .. (r + 1) * per_ray]`.
#[derive(Debug, Clone, Default)]
pub struct SampleBatch {
    pub samples: Vec<RaySample>,
    pub per_ray: usize,
    /// Rays whose interval was clamped to stay in front of the camera.
    pub clamped_rays: usize,
}

impl SampleBatch {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ray_count(&self) -> usize {
        self.samples.len().checked_div(self.per_ray).unwrap_or(0)
    }

    pub fn ray(&self, r: usize) -> &[RaySample] {
        &self.samples[r * self.per_ray..(r + 1) * self.per_ray]
    }
}

/// Ray distances of `count` samples spread uniformly over `[d - offset, d + offset]`.
/// When the interval reaches `epsilon` or below it is replaced by
/// `(epsilon, d + offset]`; the flag reports the clamp.
pub fn sample_distances(d: f64, offset: f64, count: usize, epsilon: f64) -> (Vec<f64>, bool) {
    let hi = d + offset;
    let m = (count.max(2) - 1) as f64;
    if d - offset > epsilon {
        let out = (0..count)
            .map(|s| d + offset * ((2 * s) as f64 - m) / m)
            .collect();
        return (out, false);
    }
    // open at epsilon: the first sample sits one step above it
    let step = (hi - epsilon) / count as f64;
    let out = (0..count).map(|s| hi - step * (count - 1 - s) as f64).collect();
    (out, true)
}

/// Samples every foreground ray of the group's cameras around its current depth.
pub fn sample_rays(
    group: &CameraGroup,
    rig: &MultiViewRig,
    offset: f64,
    samples_per_ray: usize,
) -> Result<SampleBatch, OptimizeError> {
    let rays: Vec<(usize, usize)> = group
        .cameras
        .iter()
        .flat_map(|&j| {
            rig.views[j]
                .mask
                .foreground_indices()
                .into_iter()
                .map(move |i| (j, i))
        })
        .collect();
    sample_rays_for(&rays, rig, offset, samples_per_ray)
}

/// Samples an explicit list of `(camera, pixel)` rays, in the given order.
pub fn sample_rays_for(
    rays: &[(usize, usize)],
    rig: &MultiViewRig,
    offset: f64,
    samples_per_ray: usize,
) -> Result<SampleBatch, OptimizeError> {
    let epsilon = 1e-4 * rig.diameter();
    let per_ray: Vec<(Vec<RaySample>, bool)> = rays
        .par_iter()
        .map(|&(j, i)| {
            let view = &rig.views[j];
            let d = view
                .depth
                .get(i)
                .ok_or(OptimizeError::MissingDepth { camera: j, pixel: i })?;
            let (distances, clamped) = sample_distances(d, offset, samples_per_ray, epsilon);
            let dir = view.camera.pixel_ray(i);
            let c = view.camera.center();
            let samples = distances
                .into_iter()
                .map(|t| RaySample {
                    point: c + dir * t,
                    camera: j as u32,
                    pixel: i as u32,
                    offset: t - d,
                    distance: t,
                })
                .collect();
            Ok((samples, clamped))
        })
        .collect::<Result<_, OptimizeError>>()?;
    let mut batch = SampleBatch {
        samples: Vec::with_capacity(rays.len() * samples_per_ray),
        per_ray: samples_per_ray,
        clamped_rays: 0,
    };
    for (samples, clamped) in per_ray {
        batch.samples.extend(samples);
        batch.clamped_rays += clamped as usize;
    }
    Ok(batch)
}
