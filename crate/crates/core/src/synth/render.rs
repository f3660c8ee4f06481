//! Ground-truth renderer: Lambertian colors, silhouettes and ray-distance depth.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::scene::Scene;
use super::SynthError;
use crate::geometry::{CameraView, MultiViewRig, PinholeCamera};

/// Per-camera RNG stream derived from the run seed.
pub(crate) fn camera_rng(seed: u64, camera: usize) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ (camera as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// Renders one view. Pixels whose ray hits the scene are foreground with
/// depth equal to the hit's ray distance.
pub fn render_view(
    scene: &Scene,
    camera: PinholeCamera,
    index: usize,
    seed: u64,
) -> Result<CameraView, SynthError> {
    let center = camera.center();
    if scene.contains(&center) {
        return Err(SynthError::DegenerateViewpoint { camera: index });
    }
    let mut view = CameraView::blank(camera);
    let w = view.width();
    let cam = &view.camera;
    let shaded: Vec<(Option<f64>, [f64; 3])> = (0..cam.pixel_count())
        .into_par_iter()
        .map(|i| {
            let dir = cam.pixel_ray(i);
            match scene.intersect(&center, &dir) {
                Some(hit) => {
                    let p = center + dir * hit.t;
                    (Some(hit.t), scene.shade(&hit, &p))
                }
                None => (None, scene.background),
            }
        })
        .collect();
    for (i, (depth, color)) in shaded.into_iter().enumerate() {
        view.image.as_mut_slice()[i] = color;
        if let Some(d) = depth {
            view.mask.as_mut_slice()[i] = true;
            view.depth.set(i, d);
        }
    }
    if scene.noise > 0.0 {
        let mut rng = camera_rng(seed, index);
        let normal = Normal::new(0.0, scene.noise).expect("finite noise");
        for px in view.image.as_mut_slice() {
            for c in px.iter_mut() {
                *c = (*c + normal.sample(&mut rng)).clamp(0.0, 1.0);
            }
        }
    }
    debug_assert_eq!(view.image.width(), w);
    Ok(view)
}

/// Renders every camera. Deterministic for a given seed.
pub fn render(scene: &Scene, cameras: Vec<PinholeCamera>, seed: u64) -> Result<MultiViewRig, SynthError> {
    if scene.shapes.is_empty() {
        return Err(SynthError::Scene("scene has no shapes".into()));
    }
    let views = cameras
        .into_par_iter()
        .enumerate()
        .map(|(i, cam)| render_view(scene, cam, i, seed))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(MultiViewRig::new(views, scene.bounds)?)
}
