use nalgebra::{Point3, Vector3};
use serde::{Deserialize, Serialize};

/// Axis-aligned box in world units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aabb {
    pub min: [f64; 3],
    pub max: [f64; 3],
}

impl Aabb {
    pub fn new(min: [f64; 3], max: [f64; 3]) -> Self {
        Self { min, max }
    }

    pub fn is_valid(&self) -> bool {
        (0..3).all(|a| self.min[a].is_finite() && self.max[a].is_finite() && self.min[a] < self.max[a])
    }

    pub fn min_point(&self) -> Point3<f64> {
        Point3::from(self.min)
    }

    pub fn max_point(&self) -> Point3<f64> {
        Point3::from(self.max)
    }

    pub fn extent(&self) -> Vector3<f64> {
        self.max_point() - self.min_point()
    }

    pub fn center(&self) -> Point3<f64> {
        nalgebra::center(&self.min_point(), &self.max_point())
    }

    /// Length of the diagonal; the "scene diameter" used for relative tolerances.
    pub fn diameter(&self) -> f64 {
        self.extent().norm()
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        (0..3).all(|a| p[a] >= self.min[a] && p[a] <= self.max[a])
    }

    pub fn contains_box(&self, other: &Aabb) -> bool {
        (0..3).all(|a| other.min[a] >= self.min[a] && other.max[a] <= self.max[a])
    }

    /// Box grown by `fraction` of its extent on every side.
    pub fn padded(&self, fraction: f64) -> Aabb {
        let e = self.extent() * fraction;
        Aabb {
            min: [self.min[0] - e.x, self.min[1] - e.y, self.min[2] - e.z],
            max: [self.max[0] + e.x, self.max[1] + e.y, self.max[2] + e.z],
        }
    }

    pub fn union(&self, other: &Aabb) -> Aabb {
        Aabb {
            min: [0, 1, 2].map(|a| self.min[a].min(other.min[a])),
            max: [0, 1, 2].map(|a| self.max[a].max(other.max[a])),
        }
    }

    /// Slab test. Returns `(t_enter, t_exit)` with `t_enter >= 0` for rays
    /// `origin + t * dir` that hit the box.
    pub fn intersect_ray(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<(f64, f64)> {
        let mut t0 = 0.0f64;
        let mut t1 = f64::INFINITY;
        for a in 0..3 {
            let inv = 1.0 / dir[a];
            let mut ta = (self.min[a] - origin[a]) * inv;
            let mut tb = (self.max[a] - origin[a]) * inv;
            if ta > tb {
                std::mem::swap(&mut ta, &mut tb);
            }
            // NaN from 0 * inf when the origin lies on a slab plane of a parallel ray
            if ta.is_nan() || tb.is_nan() {
                if origin[a] < self.min[a] || origin[a] > self.max[a] {
                    return None;
                }
                continue;
            }
            t0 = t0.max(ta);
            t1 = t1.min(tb);
            if t0 > t1 {
                return None;
            }
        }
        Some((t0, t1))
    }
}
