//! Small rendered rigs shared by the optimizer tests.

use nalgebra::{Point3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::geometry::{Aabb, Intrinsics, MultiViewRig, PinholeCamera};
use crate::synth::{
    build_scene, render, GeometryDescription, Scene, SceneDescription, ShapeDescription, Texture,
};

pub fn textured_sphere(noise: f64) -> Scene {
    build_scene(&SceneDescription {
        bounds: Aabb::new([-1.0; 3], [1.0; 3]),
        background: [0.0; 3],
        noise,
        diffuse: 1.0,
        shapes: vec![ShapeDescription {
            geometry: GeometryDescription::Sphere {
                center: [0.0; 3],
                radius: 0.6,
            },
            albedo: Texture::Sines {
                seed: 1,
                frequency: 6.0,
                waves: 12,
                contrast: 0.9,
            },
        }],
    })
    .unwrap()
}

/// Cameras at distance 3 from the origin, spread within `spread` radians of
/// the -y axis, all pixels covering the sphere.
pub fn close_rig(count: usize, size: usize, spread: f64) -> MultiViewRig {
    let f = 2.6 * size as f64;
    let c = 0.5 * (size as f64 - 1.0);
    let intr = Intrinsics {
        fx: f,
        fy: f,
        cx: c,
        cy: c,
    };
    let cameras = (0..count)
        .map(|k| {
            let a = spread * k as f64 / count.max(2) as f64;
            let (s, co) = a.sin_cos();
            let eye = Point3::new(3.0 * s, -3.0 * co, 0.3 * s);
            PinholeCamera::look_at(intr, eye, Point3::origin(), Vector3::z(), size, size).unwrap()
        })
        .collect();
    render(&textured_sphere(0.0), cameras, 0).unwrap()
}

/// `rig` with every foreground depth moved by a uniform offset in
/// `[-amplitude, amplitude]`.
pub fn jittered(rig: &MultiViewRig, amplitude: f64, seed: u64) -> MultiViewRig {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = rig.clone();
    for view in &mut out.views {
        for i in view.mask.foreground_indices() {
            let d = view.depth.get(i).unwrap();
            view.depth.set(i, d + rng.random_range(-amplitude..=amplitude));
        }
    }
    out
}
