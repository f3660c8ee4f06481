//! Calibrated views, ray geometry, depth lookup and the signed ray distance.
//!
//! Depth maps store the Euclidean distance from the camera center along each
//! pixel ray, so the signed ray distance of a point `X` with respect to view
//! `j` is a plain difference of two distances on the same axis:
//!
//! ```text
//! srdf_j(X) = D_j(X) - Z_j(X)
//! ```
//!
//! where `D_j(X)` is the bilinearly interpolated depth at the projection of
//! `X` and `Z_j(X) = |X - c_j|`. Positive values are free space between the
//! camera and the predicted surface; negative values lie beyond it.

mod bounds;
mod camera;
mod grid;

pub use bounds::Aabb;
pub use camera::{Intrinsics, Occlusion, PinholeCamera, Projection};
pub(crate) use grid::bilinear_taps;
pub use grid::{DepthMap, Grid, Mask, Rgb, RgbImage};

use nalgebra::Point3;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("camera {camera}: {message}")]
    InvalidView { camera: usize, message: String },
    #[error("invalid rig: {0}")]
    InvalidRig(String),
}

/// Bilinear depth lookup: the interpolated value plus the contributing pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DepthLookup {
    pub depth: f64,
    taps: [(usize, f64); 4],
    count: usize,
}

impl DepthLookup {
    /// `(linear pixel index, weight)` pairs; weights sum to one.
    #[inline]
    pub fn taps(&self) -> &[(usize, f64)] {
        &self.taps[..self.count]
    }
}

/// One calibrated view: camera, image, silhouette and current depth estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct CameraView {
    pub camera: PinholeCamera,
    pub image: RgbImage,
    pub mask: Mask,
    pub depth: DepthMap,
}

impl CameraView {
    /// A view with an all-background mask, black image and no depth.
    pub fn blank(camera: PinholeCamera) -> Self {
        let (w, h) = (camera.width(), camera.height());
        Self {
            camera,
            image: RgbImage::filled(w, h, [0.0; 3]),
            mask: Mask::filled(w, h, false),
            depth: DepthMap::empty(w, h),
        }
    }

    pub fn width(&self) -> usize {
        self.camera.width()
    }

    pub fn height(&self) -> usize {
        self.camera.height()
    }

    #[inline]
    pub fn project(&self, point: &Point3<f64>) -> Result<Projection, Occlusion> {
        self.camera.project(point)
    }

    /// Bilinear depth at `(u, v)`. Fails with [`Occlusion::OutOfView`] outside
    /// the image and [`Occlusion::InvalidLookup`] when any contributing pixel
    /// has no depth.
    #[inline]
    pub fn interpolate_depth(&self, u: f64, v: f64) -> Result<DepthLookup, Occlusion> {
        let (taps, count) = bilinear_taps(self.width(), self.height(), u, v).ok_or(Occlusion::OutOfView)?;
        let mut depth = 0.0;
        for &(idx, w) in &taps[..count] {
            match self.depth.get(idx) {
                Some(d) => depth += w * d,
                None => return Err(Occlusion::InvalidLookup),
            }
        }
        Ok(DepthLookup { depth, taps, count })
    }

    /// Signed ray distance of `point` with respect to this view.
    #[inline]
    pub fn srdf(&self, point: &Point3<f64>) -> Result<f64, Occlusion> {
        let p = self.project(point)?;
        let lookup = self.interpolate_depth(p.u, p.v)?;
        Ok(lookup.depth - p.ray_distance)
    }

    #[inline]
    pub fn unproject(&self, index: usize, distance: f64) -> Point3<f64> {
        self.camera.unproject(index, distance)
    }

    /// Checks grid shapes and that depth is present exactly on the foreground.
    pub fn validate(&self, index: usize) -> Result<(), GeometryError> {
        let err = |message: String| GeometryError::InvalidView {
            camera: index,
            message,
        };
        let (w, h) = (self.width(), self.height());
        if self.image.width() != w || self.image.height() != h {
            return Err(err(format!(
                "image is {}x{}, camera expects {w}x{h}",
                self.image.width(),
                self.image.height()
            )));
        }
        if self.mask.width() != w || self.mask.height() != h {
            return Err(err(format!(
                "mask is {}x{}, camera expects {w}x{h}",
                self.mask.width(),
                self.mask.height()
            )));
        }
        if self.depth.width() != w || self.depth.height() != h {
            return Err(err(format!(
                "depth map is {}x{}, camera expects {w}x{h}",
                self.depth.width(),
                self.depth.height()
            )));
        }
        Ok(())
    }

    /// True when every foreground pixel carries a depth and no background one does.
    pub fn depth_initialized(&self) -> bool {
        self.depth.matches_mask(&self.mask)
    }
}

/// Ordered set of views sharing one scene bounding box.
#[derive(Debug, Clone, PartialEq)]
pub struct MultiViewRig {
    pub views: Vec<CameraView>,
    pub bounds: Aabb,
}

impl MultiViewRig {
    /// Builds a rig; every camera center must lie outside `bounds`.
    pub fn new(views: Vec<CameraView>, bounds: Aabb) -> Result<Self, GeometryError> {
        if views.is_empty() {
            return Err(GeometryError::InvalidRig("no cameras".into()));
        }
        if !bounds.is_valid() {
            return Err(GeometryError::InvalidRig(format!("degenerate bounds {bounds:?}")));
        }
        for (i, v) in views.iter().enumerate() {
            if bounds.contains(&v.camera.center()) {
                return Err(GeometryError::InvalidRig(format!(
                    "camera {i} center lies inside the scene bounds"
                )));
            }
            v.validate(i)?;
        }
        Ok(Self { views, bounds })
    }

    /// Multi-view consistency needs at least two cameras.
    pub fn require_multi_view(&self) -> Result<(), GeometryError> {
        if self.views.len() < 2 {
            return Err(GeometryError::InvalidRig(format!(
                "at least 2 cameras required, rig has {}",
                self.views.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.views.len()
    }

    pub fn is_empty(&self) -> bool {
        self.views.is_empty()
    }

    pub fn diameter(&self) -> f64 {
        self.bounds.diameter()
    }

    /// Errors with the first camera whose depth does not match its mask.
    pub fn require_depth_initialized(&self) -> Result<(), GeometryError> {
        for (i, v) in self.views.iter().enumerate() {
            if !v.depth_initialized() {
                return Err(GeometryError::InvalidView {
                    camera: i,
                    message: "depth map not initialized on the foreground".into(),
                });
            }
        }
        Ok(())
    }
}

/// A 3D sample on a foreground pixel ray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RaySample {
    pub point: Point3<f64>,
    pub camera: u32,
    pub pixel: u32,
    /// Signed offset from the pixel's depth at sampling time.
    pub offset: f64,
    /// Ray distance of `point` from the source camera center.
    pub distance: f64,
}
