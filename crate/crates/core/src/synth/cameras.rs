//! Synthetic camera placements around a scene.

use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::{Intrinsics, PinholeCamera};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LayoutKind {
    /// Near-uniform directions on the full sphere.
    Fibonacci,
    /// Circle at a fixed elevation.
    Ring,
    /// Near-uniform directions within `cap_deg` of `axis`, like a frontal
    /// capture rig.
    Cap,
}

/// Cameras looking at a common target from a fixed distance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RigLayout {
    pub count: usize,
    pub width: usize,
    pub height: usize,
    pub distance: f64,
    /// Horizontal field of view in degrees.
    pub fov_deg: f64,
    pub layout: LayoutKind,
    /// Ring elevation in degrees.
    pub elevation_deg: f64,
    /// Cap half-angle in degrees.
    pub cap_deg: f64,
    /// Cap center direction (from the target towards the cameras).
    pub axis: [f64; 3],
}

fn default_cap() -> f64 {
    60.0
}

fn default_axis() -> [f64; 3] {
    [0.0, -1.0, 0.0]
}

impl Default for RigLayout {
    fn default() -> Self {
        Self {
            count: 16,
            width: 128,
            height: 128,
            distance: 4.0,
            fov_deg: 40.0,
            layout: LayoutKind::Fibonacci,
            elevation_deg: 0.0,
            cap_deg: default_cap(),
            axis: default_axis(),
        }
    }
}

impl RigLayout {
    pub fn intrinsics(&self) -> Intrinsics {
        let f = 0.5 * self.width as f64 / (0.5 * self.fov_deg.to_radians()).tan();
        Intrinsics {
            fx: f,
            fy: f,
            cx: (self.width as f64 - 1.0) / 2.0,
            cy: (self.height as f64 - 1.0) / 2.0,
        }
    }

    /// Unit viewing positions (from target towards the camera).
    pub fn directions(&self) -> Vec<Vector3<f64>> {
        let n = self.count;
        match self.layout {
            LayoutKind::Fibonacci => {
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..n)
                    .map(|i| {
                        let z = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let th = golden * i as f64;
                        Vector3::new(r * th.cos(), r * th.sin(), z)
                    })
                    .collect()
            }
            LayoutKind::Ring => {
                let el = self.elevation_deg.to_radians();
                (0..n)
                    .map(|i| {
                        let az = std::f64::consts::TAU * i as f64 / n as f64;
                        Vector3::new(el.cos() * az.cos(), el.cos() * az.sin(), el.sin())
                    })
                    .collect()
            }
            LayoutKind::Cap => {
                let axis = Vector3::from(self.axis).normalize();
                // any unit vector not parallel to the axis seeds the tangent frame
                let helper = if axis.z.abs() < 0.9 {
                    Vector3::z()
                } else {
                    Vector3::x()
                };
                let t1 = axis.cross(&helper).normalize();
                let t2 = axis.cross(&t1);
                let zmin = self.cap_deg.to_radians().cos();
                let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
                (0..n)
                    .map(|i| {
                        let z = 1.0 - (1.0 - zmin) * (i as f64 + 0.5) / n as f64;
                        let r = (1.0 - z * z).sqrt();
                        let th = golden * i as f64;
                        axis * z + t1 * (r * th.cos()) + t2 * (r * th.sin())
                    })
                    .collect()
            }
        }
    }

    pub fn cameras(&self, target: Point3<f64>) -> Result<Vec<PinholeCamera>, SynthError> {
        if self.count == 0 || self.width == 0 || self.height == 0 {
            return Err(SynthError::Scene(
                "rig needs cameras and a non-empty image size".into(),
            ));
        }
        if !(self.distance > 0.0 && self.fov_deg > 0.0 && self.fov_deg < 180.0) {
            return Err(SynthError::Scene(
                "rig distance must be > 0 and fov in (0, 180)".into(),
            ));
        }
        if self.layout == LayoutKind::Cap
            && (!(self.cap_deg > 0.0 && self.cap_deg <= 180.0) || Vector3::from(self.axis).norm() == 0.0)
        {
            return Err(SynthError::Scene(
                "cap layout needs cap_deg in (0, 180] and a non-zero axis".into(),
            ));
        }
        let k = self.intrinsics();
        self.directions()
            .into_iter()
            .map(|d| {
                PinholeCamera::look_at(
                    k,
                    target + d * self.distance,
                    target,
                    Vector3::z(),
                    self.width,
                    self.height,
                )
                .map_err(SynthError::from)
            })
            .collect()
    }
}
