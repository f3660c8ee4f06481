//! Scene descriptions and their ray-traceable form.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::SynthError;
use crate::geometry::{Aabb, Rgb};
use crate::io;
use crate::mesh::{uv_sphere, MeshBvh, TriangleMesh};

/// Geometry of one scene shape, as written in a scene file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GeometryDescription {
    Sphere {
        center: [f64; 3],
        radius: f64,
    },
    /// Axis-aligned box.
    Box {
        center: [f64; 3],
        half_extents: [f64; 3],
    },
    Union {
        parts: Vec<GeometryDescription>,
    },
    /// OBJ or PLY file, relative paths resolve against the scene file.
    Mesh {
        path: PathBuf,
    },
}

/// Albedo as a function of the surface point (solid textures) or face.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Texture {
    Constant {
        color: Rgb,
    },
    /// 3D checkerboard with cubic cells of side `scale`.
    Checker {
        colors: [Rgb; 2],
        scale: f64,
    },
    /// Linear blend along `axis` between the projections `start` and `end`.
    Gradient {
        from: Rgb,
        to: Rgb,
        axis: [f64; 3],
        start: f64,
        end: f64,
    },
    /// Sum of randomly oriented sinusoids per channel; `frequency` is the
    /// central spatial frequency in cycles per world unit.
    Sines {
        seed: u64,
        frequency: f64,
        #[serde(default = "default_waves")]
        waves: usize,
        #[serde(default = "default_contrast")]
        contrast: f64,
    },
    /// One color per triangle (cycled) for mesh shapes; primitives use the first.
    PerFace {
        colors: Vec<Rgb>,
    },
}

fn default_waves() -> usize {
    12
}

fn default_contrast() -> f64 {
    0.9
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ShapeDescription {
    pub geometry: GeometryDescription,
    pub albedo: Texture,
}

fn default_diffuse() -> f64 {
    1.0
}

/// Human-readable scene file contents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneDescription {
    pub bounds: Aabb,
    #[serde(default)]
    pub background: Rgb,
    /// Standard deviation of additive Gaussian RGB noise.
    #[serde(default)]
    pub noise: f64,
    /// Constant light term multiplying the albedo.
    #[serde(default = "default_diffuse")]
    pub diffuse: f64,
    pub shapes: Vec<ShapeDescription>,
}

impl SceneDescription {
    pub fn from_toml(text: &str) -> Result<Self, SynthError> {
        toml::from_str(text).map_err(|e| SynthError::Scene(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self, SynthError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| SynthError::Scene(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| SynthError::Scene(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("scene description serializes")
    }
}

#[derive(Debug, Clone)]
pub enum Geometry {
    Sphere { center: Point3<f64>, radius: f64 },
    Box { center: Point3<f64>, half: Vector3<f64> },
    Union(Vec<Geometry>),
    Mesh(Arc<MeshBvh>),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub t: f64,
    pub face: Option<usize>,
}

impl Geometry {
    fn build(desc: &GeometryDescription, base: &Path) -> Result<Self, SynthError> {
        Ok(match desc {
            GeometryDescription::Sphere { center, radius } => {
                if !(*radius > 0.0) {
                    return Err(SynthError::Scene(format!("sphere radius {radius} <= 0")));
                }
                Geometry::Sphere {
                    center: Point3::from(*center),
                    radius: *radius,
                }
            }
            GeometryDescription::Box { center, half_extents } => {
                if half_extents.iter().any(|h| !(*h > 0.0)) {
                    return Err(SynthError::Scene("box half extents must be > 0".into()));
                }
                Geometry::Box {
                    center: Point3::from(*center),
                    half: Vector3::from(*half_extents),
                }
            }
            GeometryDescription::Union { parts } => Geometry::Union(
                parts
                    .iter()
                    .map(|p| Geometry::build(p, base))
                    .collect::<Result<_, _>>()?,
            ),
            GeometryDescription::Mesh { path } => {
                let full = if path.is_absolute() {
                    path.clone()
                } else {
                    base.join(path)
                };
                let mesh = io::read_mesh(&full)?;
                if mesh.is_empty() {
                    return Err(SynthError::Scene(format!(
                        "{}: mesh has no faces",
                        full.display()
                    )));
                }
                Geometry::Mesh(Arc::new(MeshBvh::build(mesh)))
            }
        })
    }

    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<Hit> {
        match self {
            Geometry::Sphere { center, radius } => {
                let oc = origin - center;
                let b = oc.dot(dir);
                let c = oc.norm_squared() - radius * radius;
                let disc = b * b - c;
                if disc < 0.0 {
                    return None;
                }
                let sq = disc.sqrt();
                let t0 = -b - sq;
                let t1 = -b + sq;
                let t = if t0 > 0.0 { t0 } else { t1 };
                (t > 0.0).then_some(Hit { t, face: None })
            }
            Geometry::Box { center, half } => {
                let b = Aabb::new((center.coords - half).into(), (center.coords + half).into());
                let (t0, t1) = b.intersect_ray(origin, dir)?;
                let t = if t0 > 0.0 { t0 } else { t1 };
                (t > 0.0).then_some(Hit { t, face: None })
            }
            Geometry::Union(parts) => parts
                .iter()
                .filter_map(|p| p.intersect(origin, dir))
                .min_by(|a, b| a.t.total_cmp(&b.t)),
            Geometry::Mesh(bvh) => bvh.intersect(origin, dir).map(|h| Hit {
                t: h.t,
                face: Some(h.triangle),
            }),
        }
    }

    /// Analytic signed distance (negative inside); `None` for meshes.
    pub fn sdf(&self, p: &Point3<f64>) -> Option<f64> {
        match self {
            Geometry::Sphere { center, radius } => Some((p - center).norm() - radius),
            Geometry::Box { center, half } => {
                let q = (p - center).abs() - half;
                let outside = q.sup(&Vector3::zeros()).norm();
                let inside = q.max().min(0.0);
                Some(outside + inside)
            }
            Geometry::Union(parts) => parts
                .iter()
                .map(|g| g.sdf(p))
                .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d))),
            Geometry::Mesh(_) => None,
        }
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        match self {
            Geometry::Mesh(bvh) => {
                // parity along a direction unlikely to graze edges
                let dir = Vector3::new(0.5773, 0.5774, 0.5775).normalize();
                bvh.count_crossings(p, &dir) % 2 == 1
            }
            Geometry::Union(parts) => parts.iter().any(|g| g.contains(p)),
            other => other.sdf(p).is_some_and(|d| d < 0.0),
        }
    }

    pub fn bounds(&self) -> Aabb {
        match self {
            Geometry::Sphere { center, radius } => Aabb::new(
                (center.coords.add_scalar(-radius)).into(),
                (center.coords.add_scalar(*radius)).into(),
            ),
            Geometry::Box { center, half } => {
                Aabb::new((center.coords - half).into(), (center.coords + half).into())
            }
            Geometry::Union(parts) => parts
                .iter()
                .map(Geometry::bounds)
                .reduce(|a, b| a.union(&b))
                .unwrap_or(Aabb::new([0.0; 3], [0.0; 3])),
            Geometry::Mesh(bvh) => bvh.bounds().expect("non-empty mesh"),
        }
    }
}

/// Precomputed texture state.
#[derive(Debug, Clone)]
enum TextureEval {
    Constant(Rgb),
    Checker([Rgb; 2], f64),
    Gradient(Rgb, Rgb, Vector3<f64>, f64, f64),
    Sines {
        // per channel: (direction scaled by 2*pi*frequency, phase)
        waves: [Vec<(Vector3<f64>, f64)>; 3],
        gain: f64,
    },
    PerFace(Vec<Rgb>),
}

impl TextureEval {
    fn build(t: &Texture) -> Result<Self, SynthError> {
        Ok(match t {
            Texture::Constant { color } => TextureEval::Constant(*color),
            Texture::Checker { colors, scale } => {
                if !(*scale > 0.0) {
                    return Err(SynthError::Scene("checker scale must be > 0".into()));
                }
                TextureEval::Checker(*colors, *scale)
            }
            Texture::Gradient {
                from,
                to,
                axis,
                start,
                end,
            } => {
                let a = Vector3::from(*axis);
                if a.norm() == 0.0 || start == end {
                    return Err(SynthError::Scene("degenerate gradient".into()));
                }
                TextureEval::Gradient(*from, *to, a.normalize(), *start, *end)
            }
            Texture::Sines {
                seed,
                frequency,
                waves,
                contrast,
            } => {
                if *waves == 0 || !(*frequency > 0.0) {
                    return Err(SynthError::Scene(
                        "sines texture needs waves > 0 and frequency > 0".into(),
                    ));
                }
                let mut rng = ChaCha8Rng::seed_from_u64(*seed);
                let mut make = || {
                    (0..*waves)
                        .map(|_| {
                            let z: f64 = rng.random_range(-1.0..1.0);
                            let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                            let r = (1.0 - z * z).sqrt();
                            let dir = Vector3::new(r * phi.cos(), r * phi.sin(), z);
                            // log-uniform in [f/2, 2f]
                            let f = frequency * 2f64.powf(rng.random_range(-1.0..1.0));
                            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                            (dir * (std::f64::consts::TAU * f), phase)
                        })
                        .collect::<Vec<_>>()
                };
                let waves_rgb = [make(), make(), make()];
                // sum of n random-phase unit sines has std sqrt(n/2)
                let gain = 0.5 * contrast / (2.0 * (*waves as f64 / 2.0).sqrt());
                TextureEval::Sines {
                    waves: waves_rgb,
                    gain,
                }
            }
            Texture::PerFace { colors } => {
                if colors.is_empty() {
                    return Err(SynthError::Scene("per-face texture needs colors".into()));
                }
                TextureEval::PerFace(colors.clone())
            }
        })
    }

    fn eval(&self, p: &Point3<f64>, face: Option<usize>) -> Rgb {
        match self {
            TextureEval::Constant(c) => *c,
            TextureEval::Checker(colors, s) => {
                let k = (p.x / s).floor() as i64 + (p.y / s).floor() as i64 + (p.z / s).floor() as i64;
                colors[k.rem_euclid(2) as usize]
            }
            TextureEval::Gradient(a, b, axis, start, end) => {
                let t = ((p.coords.dot(axis) - start) / (end - start)).clamp(0.0, 1.0);
                [0, 1, 2].map(|c| a[c] + t * (b[c] - a[c]))
            }
            TextureEval::Sines { waves, gain } => [0, 1, 2].map(|c| {
                let s: f64 = waves[c]
                    .iter()
                    .map(|(k, phase)| (k.dot(&p.coords) + phase).sin())
                    .sum();
                (0.5 + gain * s).clamp(0.0, 1.0)
            }),
            TextureEval::PerFace(colors) => colors[face.unwrap_or(0) % colors.len()],
        }
    }
}

#[derive(Debug, Clone)]
pub struct Shape {
    pub geometry: Geometry,
    texture: TextureEval,
}

impl Shape {
    pub fn albedo(&self, p: &Point3<f64>, face: Option<usize>) -> Rgb {
        self.texture.eval(p, face)
    }
}

/// Ray-traceable scene.
#[derive(Debug, Clone)]
pub struct Scene {
    pub bounds: Aabb,
    pub background: Rgb,
    pub noise: f64,
    pub diffuse: f64,
    pub shapes: Vec<Shape>,
}

/// Nearest surface hit of a ray.
#[derive(Debug, Clone, Copy)]
pub struct SceneHit {
    pub t: f64,
    pub shape: usize,
    pub face: Option<usize>,
}

impl Scene {
    /// Builds a scene; relative mesh paths resolve against `base_dir`.
    pub fn build(desc: &SceneDescription, base_dir: &Path) -> Result<Self, SynthError> {
        if desc.shapes.is_empty() {
            return Err(SynthError::Scene("scene has no shapes".into()));
        }
        if !desc.bounds.is_valid() {
            return Err(SynthError::Scene(format!("invalid bounds {:?}", desc.bounds)));
        }
        if !(desc.noise >= 0.0) || !(desc.diffuse > 0.0) {
            return Err(SynthError::Scene("noise must be >= 0 and diffuse > 0".into()));
        }
        let shapes = desc
            .shapes
            .iter()
            .map(|s| {
                Ok(Shape {
                    geometry: Geometry::build(&s.geometry, base_dir)?,
                    texture: TextureEval::build(&s.albedo)?,
                })
            })
            .collect::<Result<Vec<_>, SynthError>>()?;
        for (i, s) in shapes.iter().enumerate() {
            if !desc.bounds.contains_box(&s.geometry.bounds()) {
                return Err(SynthError::Scene(format!(
                    "shape {i} extends outside the scene bounds"
                )));
            }
        }
        Ok(Self {
            bounds: desc.bounds,
            background: desc.background,
            noise: desc.noise,
            diffuse: desc.diffuse,
            shapes,
        })
    }

    pub fn intersect(&self, origin: &Point3<f64>, dir: &Vector3<f64>) -> Option<SceneHit> {
        let mut best: Option<SceneHit> = None;
        for (i, s) in self.shapes.iter().enumerate() {
            if let Some(h) = s.geometry.intersect(origin, dir) {
                if best.is_none_or(|b| h.t < b.t) {
                    best = Some(SceneHit {
                        t: h.t,
                        shape: i,
                        face: h.face,
                    });
                }
            }
        }
        best
    }

    /// Analytic scene SDF; `None` when any shape is a mesh.
    pub fn sdf(&self, p: &Point3<f64>) -> Option<f64> {
        self.shapes
            .iter()
            .map(|s| s.geometry.sdf(p))
            .try_fold(f64::INFINITY, |acc, d| d.map(|d| acc.min(d)))
    }

    pub fn contains(&self, p: &Point3<f64>) -> bool {
        self.shapes.iter().any(|s| s.geometry.contains(p))
    }

    /// Triangulated outer surface: every shape is tessellated (`detail`
    /// controls sphere stacks and box face subdivisions) and triangles whose
    /// centroid lies inside another shape are dropped.
    pub fn surface_mesh(&self, detail: usize) -> TriangleMesh {
        let detail = detail.max(2);
        let mut out = TriangleMesh::default();
        for (i, shape) in self.shapes.iter().enumerate() {
            let mut part = TriangleMesh::default();
            tessellate(&shape.geometry, detail, &mut part);
            part.triangles.retain(|&t| {
                let [a, b, c] = t.map(|k| part.vertices[k as usize].coords);
                let centroid = Point3::from((a + b + c) / 3.0);
                !self
                    .shapes
                    .iter()
                    .enumerate()
                    .any(|(j, other)| j != i && other.geometry.contains(&centroid))
            });
            part.remove_unreferenced_vertices();
            out.append(&part);
        }
        out
    }

    /// Shaded color of a hit: albedo times the constant light term.
    pub fn shade(&self, hit: &SceneHit, point: &Point3<f64>) -> Rgb {
        let a = self.shapes[hit.shape].albedo(point, hit.face);
        a.map(|c| c * self.diffuse)
    }
}

fn tessellate(geometry: &Geometry, detail: usize, out: &mut TriangleMesh) {
    match geometry {
        Geometry::Sphere { center, radius } => {
            out.append(&uv_sphere(center.coords.into(), *radius, detail, 2 * detail));
        }
        Geometry::Box { center, half } => {
            let mut m = TriangleMesh::default();
            for axis in 0..3 {
                for sign in [-1.0, 1.0] {
                    let (a, b) = ((axis + 1) % 3, (axis + 2) % 3);
                    // (a, b, axis) is right-handed, so u x v points along +axis.
                    let (ua, vb) = if sign > 0.0 { (a, b) } else { (b, a) };
                    let base = m.vertices.len() as u32;
                    for j in 0..=detail {
                        for i in 0..=detail {
                            let mut p = center.coords;
                            p[axis] += sign * half[axis];
                            p[ua] += half[ua] * (2.0 * i as f64 / detail as f64 - 1.0);
                            p[vb] += half[vb] * (2.0 * j as f64 / detail as f64 - 1.0);
                            m.vertices.push(Point3::from(p));
                        }
                    }
                    let id = |i: usize, j: usize| base + (j * (detail + 1) + i) as u32;
                    for j in 0..detail {
                        for i in 0..detail {
                            m.triangles.push([id(i, j), id(i + 1, j), id(i + 1, j + 1)]);
                            m.triangles.push([id(i, j), id(i + 1, j + 1), id(i, j + 1)]);
                        }
                    }
                }
            }
            out.append(&m);
        }
        Geometry::Union(parts) => {
            for p in parts {
                tessellate(p, detail, out);
            }
        }
        Geometry::Mesh(bvh) => out.append(bvh.mesh()),
    }
}

/// Convenience for tests and examples: resolve relative paths against `.`.
pub fn build_scene(desc: &SceneDescription) -> Result<Scene, SynthError> {
    Scene::build(desc, Path::new("."))
}
