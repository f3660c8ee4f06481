//! Visual-hull carving and depth initialization from silhouettes.
//!
//! A voxel survives when every camera that sees it projects it onto the
//! silhouette. With `conservative` set, the silhouette test is widened by the
//! voxel's projected radius plus one pixel, which guarantees that the carved
//! hull contains every surface point observed as foreground; the pure
//! voxel-center test can carve voxels that straddle a silhouette boundary.
//! Each foreground pixel then gets the ray distance at which its ray enters
//! the first surviving voxel.

use nalgebra::{Point3, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::{Aabb, CameraView, Mask, MultiViewRig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HullParams {
    /// Voxels per axis.
    pub resolution: usize,
    pub conservative: bool,
}

impl Default for HullParams {
    fn default() -> Self {
        Self {
            resolution: 128,
            conservative: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct HullReport {
    pub surviving_voxels: usize,
    /// Foreground pixels whose ray met no surviving voxel.
    pub fallback_pixels: usize,
}

/// Boolean voxel grid over a box.
#[derive(Debug, Clone)]
pub struct VoxelHull {
    pub bounds: Aabb,
    pub resolution: usize,
    occupied: Vec<bool>,
}

impl VoxelHull {
    #[inline]
    fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (z * self.resolution + y) * self.resolution + x
    }

    pub fn voxel_size(&self) -> Vector3<f64> {
        self.bounds.extent() / self.resolution as f64
    }

    pub fn is_occupied(&self, x: usize, y: usize, z: usize) -> bool {
        self.occupied[self.index(x, y, z)]
    }

    pub fn occupied_count(&self) -> usize {
        self.occupied.iter().filter(|&&o| o).count()
    }

    pub fn voxel_center(&self, x: usize, y: usize, z: usize) -> Point3<f64> {
        let s = self.voxel_size();
        Point3::new(
            self.bounds.min[0] + (x as f64 + 0.5) * s.x,
            self.bounds.min[1] + (y as f64 + 0.5) * s.y,
            self.bounds.min[2] + (z as f64 + 0.5) * s.z,
        )
    }

    /// Ray distance at which the ray enters the first occupied voxel.
    pub fn first_hit(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<f64> {
        let (t_enter, t_exit) = self.bounds.intersect_ray(origin, dir)?;
        let s = self.voxel_size();
        let n = self.resolution as i64;
        let start = origin + dir * t_enter;
        let mut idx = [0i64; 3];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for a in 0..3 {
            let rel = (start[a] - self.bounds.min[a]) / s[a];
            idx[a] = (rel.floor() as i64).clamp(0, n - 1);
            if dir[a] > 0.0 {
                step[a] = 1;
                let boundary = self.bounds.min[a] + (idx[a] + 1) as f64 * s[a];
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = s[a] / dir[a];
            } else if dir[a] < 0.0 {
                step[a] = -1;
                let boundary = self.bounds.min[a] + idx[a] as f64 * s[a];
                t_max[a] = (boundary - origin[a]) / dir[a];
                t_delta[a] = -s[a] / dir[a];
            }
        }
        let mut t = t_enter;
        loop {
            if self.occupied[self.index(idx[0] as usize, idx[1] as usize, idx[2] as usize)] {
                return Some(t);
            }
            let a = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            t = t_max[a];
            if t > t_exit {
                return None;
            }
            idx[a] += step[a];
            if idx[a] < 0 || idx[a] >= n {
                return None;
            }
            t_max[a] += t_delta[a];
        }
    }
}

/// Squared Euclidean distance (in pixels) from every pixel to the nearest
/// foreground pixel center; separable exact transform.
pub(crate) fn foreground_distance_sq(mask: &Mask) -> Vec<f64> {
    let (w, h) = (mask.width(), mask.height());
    let inf = 1e20;
    let mut grid: Vec<f64> = mask
        .as_slice()
        .iter()
        .map(|&m| if m { 0.0 } else { inf })
        .collect();
    let mut f = vec![0.0; w.max(h)];
    let mut out = vec![0.0; w.max(h)];
    for x in 0..w {
        for y in 0..h {
            f[y] = grid[y * w + x];
        }
        edt_1d(&f[..h], &mut out[..h]);
        for y in 0..h {
            grid[y * w + x] = out[y];
        }
    }
    for y in 0..h {
        f[..w].copy_from_slice(&grid[y * w..(y + 1) * w]);
        edt_1d(&f[..w], &mut out[..w]);
        grid[y * w..(y + 1) * w].copy_from_slice(&out[..w]);
    }
    grid
}

// Lower envelope of parabolas (Felzenszwalb & Huttenlocher).
fn edt_1d(f: &[f64], d: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = f64::NEG_INFINITY;
    z[1] = f64::INFINITY;
    for q in 1..n {
        loop {
            let p = v[k];
            let s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q as f64 - p as f64));
            if s <= z[k] && k > 0 {
                k -= 1;
                continue;
            }
            if s <= z[k] {
                // k == 0 and the new parabola dominates everywhere
                v[0] = q;
                z[0] = f64::NEG_INFINITY;
                z[1] = f64::INFINITY;
                break;
            }
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = f64::INFINITY;
            break;
        }
    }
    k = 0;
    for (q, out) in d.iter_mut().enumerate() {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let dq = q as f64 - p as f64;
        *out = dq * dq + f[p];
    }
}

struct SilhouetteTest<'a> {
    view: &'a CameraView,
    dist_sq: Option<Vec<f64>>,
    focal: f64,
}

impl SilhouetteTest<'_> {
    /// `false` only when the camera sees the voxel and rules it out.
    fn admits(&self, center: &Point3<f64>, half_diag: f64) -> bool {
        let Ok(p) = self.view.project(center) else {
            return true;
        };
        let (w, h) = (self.view.width() as f64, self.view.height() as f64);
        let x = p.u.round();
        let y = p.v.round();
        if x < 0.0 || y < 0.0 || x > w - 1.0 || y > h - 1.0 {
            return true;
        }
        let idx = y as usize * self.view.width() + x as usize;
        match &self.dist_sq {
            None => self.view.mask.as_slice()[idx],
            Some(dsq) => {
                // planar depth of the voxel center bounds its projected radius
                let z = (self.view.camera.rotation() * center.coords + self.view.camera.translation()).z;
                let radius = self.focal * half_diag / (z - half_diag).max(1e-9);
                let reach = radius + 1.0 + std::f64::consts::FRAC_1_SQRT_2;
                dsq[idx] <= reach * reach
            }
        }
    }
}

/// Carves the voxel hull of the rig's silhouettes.
pub fn carve(rig: &MultiViewRig, params: &HullParams) -> Result<VoxelHull, SynthError> {
    if params.resolution < 16 {
        return Err(SynthError::Hull(format!(
            "hull resolution must be >= 16, got {}",
            params.resolution
        )));
    }
    let tests: Vec<SilhouetteTest> = rig
        .views
        .par_iter()
        .map(|v| SilhouetteTest {
            view: v,
            dist_sq: params.conservative.then(|| foreground_distance_sq(&v.mask)),
            focal: v.camera.intrinsics().fx.max(v.camera.intrinsics().fy),
        })
        .collect();
    let n = params.resolution;
    let mut hull = VoxelHull {
        bounds: rig.bounds,
        resolution: n,
        occupied: vec![false; n * n * n],
    };
    let half_diag = 0.5 * hull.voxel_size().norm();
    let hull_ref = &hull;
    let occupied: Vec<bool> = (0..n * n * n)
        .into_par_iter()
        .map(|i| {
            let (x, y, z) = (i % n, (i / n) % n, i / (n * n));
            let c = hull_ref.voxel_center(x, y, z);
            tests.iter().all(|t| t.admits(&c, half_diag))
        })
        .collect();
    hull.occupied = occupied;
    Ok(hull)
}

/// Replaces every view's depth with the visual-hull entry distance.
pub fn visual_hull_init(rig: &mut MultiViewRig, params: &HullParams) -> Result<HullReport, SynthError> {
    let hull = carve(rig, params)?;
    let bounds = rig.bounds;
    let mut report = HullReport {
        surviving_voxels: hull.occupied_count(),
        fallback_pixels: 0,
    };
    for view in &mut rig.views {
        let fg = view.mask.foreground_indices();
        let center = view.camera.center();
        let results: Vec<(f64, bool)> = fg
            .par_iter()
            .map(|&i| {
                let dir = view.camera.pixel_ray(i);
                match hull.first_hit(&center, &dir) {
                    Some(t) if t > 0.0 => (t, false),
                    _ => match bounds.intersect_ray(&center, &dir) {
                        Some((t0, _)) if t0 > 0.0 => (t0, true),
                        _ => ((bounds.center() - center).norm(), true),
                    },
                }
            })
            .collect();
        let mut depth = crate::geometry::DepthMap::empty(view.width(), view.height());
        for (&i, &(t, fallback)) in fg.iter().zip(&results) {
            depth.set(i, t);
            report.fallback_pixels += fallback as usize;
        }
        view.depth = depth;
    }
    if report.fallback_pixels > 0 {
        log::warn!(
            "visual hull: {} foreground pixels fell back to the bounding-box entry distance",
            report.fallback_pixels
        );
    }
    Ok(report)
}
