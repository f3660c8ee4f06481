//! Pinhole camera model and the ray-distance geometry built on it.

use nalgebra::{Matrix3, Point3, Vector3};

use super::GeometryError;

/// Focal lengths and principal point, in pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Intrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
}

/// Reason a point cannot be observed by a camera. Callers treat any of these
/// as "camera occluded for this sample".
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Occlusion {
    /// At or behind the camera center along the optical axis.
    BehindCamera,
    /// Projects outside the image rectangle.
    OutOfView,
    /// Bilinear support touches a background pixel.
    InvalidLookup,
}

impl std::fmt::Display for Occlusion {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Occlusion::BehindCamera => "behind camera",
            Occlusion::OutOfView => "out of view",
            Occlusion::InvalidLookup => "invalid lookup",
        })
    }
}

/// Continuous projection of a world point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Projection {
    pub u: f64,
    pub v: f64,
    /// Euclidean distance from the camera center.
    pub ray_distance: f64,
}

/// Calibrated pinhole camera. `rotation`/`translation` map world to camera
/// coordinates: `x_cam = R * x_world + t`, with +z along the optical axis.
#[derive(Debug, Clone, PartialEq)]
pub struct PinholeCamera {
    intrinsics: Intrinsics,
    rotation: Matrix3<f64>,
    translation: Vector3<f64>,
    width: usize,
    height: usize,
    center: Point3<f64>,
}

impl PinholeCamera {
    pub fn new(
        intrinsics: Intrinsics,
        rotation: Matrix3<f64>,
        translation: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let Intrinsics { fx, fy, cx, cy } = intrinsics;
        if !(fx > 0.0 && fy > 0.0 && fx.is_finite() && fy.is_finite()) {
            return Err(GeometryError::InvalidCamera(format!(
                "focal lengths must be positive (fx={fx}, fy={fy})"
            )));
        }
        if width == 0 || height == 0 {
            return Err(GeometryError::InvalidCamera("empty image".into()));
        }
        if !(cx >= 0.0 && cx < width as f64 && cy >= 0.0 && cy < height as f64) {
            return Err(GeometryError::InvalidCamera(format!(
                "principal point ({cx}, {cy}) outside {width}x{height} image"
            )));
        }
        let orth = (rotation.transpose() * rotation - Matrix3::identity())
            .abs()
            .max();
        let det = rotation.determinant();
        if !(orth <= 1e-9 && (det - 1.0).abs() <= 1e-9) {
            return Err(GeometryError::InvalidCamera(format!(
                "rotation not orthonormal with det +1 (|RtR-I|={orth:e}, det={det})"
            )));
        }
        if !translation.iter().all(|t| t.is_finite()) {
            return Err(GeometryError::InvalidCamera("non-finite translation".into()));
        }
        let center = Point3::from(-(rotation.transpose() * translation));
        Ok(Self {
            intrinsics,
            rotation,
            translation,
            width,
            height,
            center,
        })
    }

    /// Camera at `eye` looking at `target`. `up` is a rough world up vector.
    pub fn look_at(
        intrinsics: Intrinsics,
        eye: Point3<f64>,
        target: Point3<f64>,
        up: Vector3<f64>,
        width: usize,
        height: usize,
    ) -> Result<Self, GeometryError> {
        let forward = (target - eye).normalize();
        let mut right = forward.cross(&up);
        if right.norm() < 1e-9 {
            // up parallel to viewing direction
            let alt = if forward.x.abs() < 0.9 {
                Vector3::x()
            } else {
                Vector3::y()
            };
            right = forward.cross(&alt);
        }
        let right = right.normalize();
        // image y grows downward
        let down = forward.cross(&right);
        let rotation = Matrix3::from_rows(&[right.transpose(), down.transpose(), forward.transpose()]);
        let translation = -(rotation * eye.coords);
        Self::new(intrinsics, rotation, translation, width, height)
    }

    #[inline]
    pub fn intrinsics(&self) -> Intrinsics {
        self.intrinsics
    }

    #[inline]
    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    #[inline]
    pub fn translation(&self) -> &Vector3<f64> {
        &self.translation
    }

    #[inline]
    pub fn center(&self) -> Point3<f64> {
        self.center
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Perspective projection and Euclidean ray distance of `point`.
    #[inline]
    pub fn project(&self, point: &Point3<f64>) -> Result<Projection, Occlusion> {
        let pc = self.rotation * point.coords + self.translation;
        if !(pc.z > 0.0) {
            return Err(Occlusion::BehindCamera);
        }
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        Ok(Projection {
            u: fx * pc.x / pc.z + cx,
            v: fy * pc.y / pc.z + cy,
            ray_distance: pc.norm(),
        })
    }

    /// Unit world-space direction of the ray through continuous pixel `(u, v)`.
    #[inline]
    pub fn ray_direction(&self, u: f64, v: f64) -> Vector3<f64> {
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        let dc = Vector3::new((u - cx) / fx, (v - cy) / fy, 1.0);
        (self.rotation.transpose() * dc).normalize()
    }

    /// Unit ray direction through the center of pixel `index`.
    #[inline]
    pub fn pixel_ray(&self, index: usize) -> Vector3<f64> {
        let (x, y) = (index % self.width, index / self.width);
        self.ray_direction(x as f64, y as f64)
    }

    /// Point at ray distance `distance` along the ray through pixel `index`.
    pub fn unproject(&self, index: usize, distance: f64) -> Point3<f64> {
        debug_assert!(index < self.pixel_count());
        self.center + self.pixel_ray(index) * distance
    }

    /// Ratio between ray distance and planar (optical-axis) depth at `(u, v)`,
    /// i.e. `1 / cos(angle to the optical axis)`.
    pub fn ray_to_planar_factor(&self, u: f64, v: f64) -> f64 {
        let Intrinsics { fx, fy, cx, cy } = self.intrinsics;
        let a = (u - cx) / fx;
        let b = (v - cy) / fy;
        (1.0 + a * a + b * b).sqrt()
    }
}
