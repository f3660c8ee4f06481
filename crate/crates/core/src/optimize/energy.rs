//! Volumetric consistency energy of a camera group and its depth gradient.
//!
//! Each sample contributes `c_srdf * c_phi`. The photometric factor is a
//! constant weight and sample positions are held fixed, so the gradient only
//! flows through the signed ray distances: into the sample's own pixel with
//! coefficient +1, and into the bilinear taps of every other camera's depth
//! lookup.

use rayon::prelude::*;

use super::{CameraGroup, SampleBatch};
use crate::consistency::{
    c_srdf_into, ConsistencyError, ConsistencyParams, Observation, PhotoPrior, PriorContext,
};
use crate::geometry::{DepthLookup, MultiViewRig, RaySample};

/// Rays per reduction chunk. Fixed so the summation order does not depend on
/// the thread count.
const RAYS_PER_CHUNK: usize = 64;

/// Energy of a batch and its gradient with respect to the group's depths.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyEval {
    pub energy: f64,
    /// Aligned with the group's cameras; dense over each camera's pixels,
    /// zero on the background.
    pub gradient: Vec<Vec<f64>>,
    /// Samples no group camera could observe.
    pub dropped_samples: usize,
}

impl EnergyEval {
    pub fn grad_norm(&self) -> f64 {
        self.gradient
            .iter()
            .flat_map(|g| g.iter())
            .map(|g| g * g)
            .sum::<f64>()
            .sqrt()
    }
}

/// Both consistency signals of one sample, with per-camera detail.
#[derive(Debug, Clone, PartialEq)]
pub struct PerSampleEvaluation {
    pub c_srdf: f64,
    pub c_phi: f64,
    /// Aligned with the group's cameras; `None` marks an occluded camera.
    pub srdf: Vec<Option<f64>>,
    /// `d c_srdf / d srdf_k`; zero for occluded cameras.
    pub partials: Vec<f64>,
}

impl PerSampleEvaluation {
    pub fn valid(&self) -> Vec<bool> {
        self.srdf.iter().map(Option::is_some).collect()
    }
}

#[derive(Default)]
struct Scratch {
    srdf: Vec<Option<f64>>,
    partials: Vec<f64>,
    observations: Vec<Option<Observation>>,
    lookups: Vec<Option<DepthLookup>>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Self {
            srdf: vec![None; n],
            partials: vec![0.0; n],
            observations: vec![None; n],
            lookups: vec![None; n],
        }
    }
}

/// Fills `scratch` for one sample; returns `(c_srdf, c_phi)` or `None` when
/// no camera observes it.
#[inline]
fn evaluate_into(
    sample: &RaySample,
    group: &[usize],
    rig: &MultiViewRig,
    params: &ConsistencyParams,
    prior: &dyn PhotoPrior,
    s: &mut Scratch,
) -> Option<(f64, f64)> {
    let own = sample.camera as usize;
    let pixel = sample.pixel as usize;
    for (slot, &k) in group.iter().enumerate() {
        s.lookups[slot] = None;
        if k == own {
            // the sample lies on pixel `pixel`'s ray, so D_j(X) is its depth
            let view = &rig.views[k];
            let obs = view.depth.get(pixel).map(|d| {
                let (x, y) = view.image.coords(pixel);
                (
                    d - sample.distance,
                    Observation {
                        color: view.image.as_slice()[pixel],
                        u: x as f64,
                        v: y as f64,
                    },
                )
            });
            s.srdf[slot] = obs.map(|o| o.0);
            s.observations[slot] = obs.map(|o| o.1);
            continue;
        }
        match crate::consistency::observe(rig, k, &sample.point) {
            Ok((obs, lookup, z)) => {
                s.srdf[slot] = Some(lookup.depth - z);
                s.observations[slot] = Some(obs);
                s.lookups[slot] = Some(lookup);
            }
            Err(_) => {
                s.srdf[slot] = None;
                s.observations[slot] = None;
            }
        }
    }
    let c_srdf = c_srdf_into(&s.srdf, params.sigma_d, params.gamma_srdf, &mut s.partials)?;
    let ctx = PriorContext {
        sample,
        rig,
        group,
        observations: &s.observations,
    };
    let c_phi = prior.score(&ctx, params);
    Some((c_srdf, c_phi))
}

/// Evaluates both signals for one sample over the group's cameras.
pub fn evaluate_sample(
    sample: &RaySample,
    group: &CameraGroup,
    rig: &MultiViewRig,
    params: &ConsistencyParams,
    prior: &dyn PhotoPrior,
) -> Result<PerSampleEvaluation, ConsistencyError> {
    let mut s = Scratch::new(group.len());
    let (c_srdf, c_phi) = evaluate_into(sample, &group.cameras, rig, params, prior, &mut s)
        .ok_or(ConsistencyError::NoVisibility)?;
    Ok(PerSampleEvaluation {
        c_srdf,
        c_phi,
        srdf: s.srdf,
        partials: s.partials,
    })
}

struct ChunkResult {
    energy: f64,
    dropped: usize,
    // (group slot, pixel, dE/d depth)
    contributions: Vec<(u32, u32, f64)>,
}

/// Energy of `batch` and its analytic gradient. The reduction runs over
/// fixed-size ray chunks in batch order, so results are bitwise reproducible
/// for any thread count.
pub fn energy(
    batch: &SampleBatch,
    group: &CameraGroup,
    rig: &MultiViewRig,
    params: &ConsistencyParams,
    prior: &dyn PhotoPrior,
) -> EnergyEval {
    let n = group.len();
    let mut gradient: Vec<Vec<f64>> = group
        .cameras
        .iter()
        .map(|&k| vec![0.0; rig.views[k].camera.pixel_count()])
        .collect();
    if batch.is_empty() {
        return EnergyEval {
            energy: 0.0,
            gradient,
            dropped_samples: 0,
        };
    }
    let chunk_len = RAYS_PER_CHUNK * batch.per_ray;
    let chunks: Vec<ChunkResult> = batch
        .samples
        .par_chunks(chunk_len)
        .map(|samples| {
            let mut s = Scratch::new(n);
            let mut out = ChunkResult {
                energy: 0.0,
                dropped: 0,
                contributions: Vec::with_capacity(samples.len() * 2),
            };
            for sample in samples {
                let Some((c_srdf, c_phi)) = evaluate_into(sample, &group.cameras, rig, params, prior, &mut s)
                else {
                    out.dropped += 1;
                    continue;
                };
                out.energy += c_srdf * c_phi;
                for slot in 0..n {
                    let p = s.partials[slot];
                    if p == 0.0 {
                        continue;
                    }
                    let g = c_phi * p;
                    match &s.lookups[slot] {
                        None => out.contributions.push((slot as u32, sample.pixel, g)),
                        Some(lookup) => {
                            for &(idx, w) in lookup.taps() {
                                out.contributions.push((slot as u32, idx as u32, g * w));
                            }
                        }
                    }
                }
            }
            out
        })
        .collect();
    let mut total = 0.0;
    let mut dropped = 0;
    for chunk in chunks {
        total += chunk.energy;
        dropped += chunk.dropped;
        for (slot, pixel, g) in chunk.contributions {
            gradient[slot as usize][pixel as usize] += g;
        }
    }
    EnergyEval {
        energy: total,
        gradient,
        dropped_samples: dropped,
    }
}

/// Energy only; same value as [`energy`] without building the gradient.
pub fn energy_value(
    batch: &SampleBatch,
    group: &CameraGroup,
    rig: &MultiViewRig,
    params: &ConsistencyParams,
    prior: &dyn PhotoPrior,
) -> f64 {
    if batch.is_empty() {
        return 0.0;
    }
    let n = group.len();
    let chunk_len = RAYS_PER_CHUNK * batch.per_ray;
    let sums: Vec<f64> = batch
        .samples
        .par_chunks(chunk_len)
        .map(|samples| {
            let mut s = Scratch::new(n);
            let mut e = 0.0;
            for sample in samples {
                if let Some((c_srdf, c_phi)) =
                    evaluate_into(sample, &group.cameras, rig, params, prior, &mut s)
                {
                    e += c_srdf * c_phi;
                }
            }
            e
        })
        .collect();
    sums.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::consistency::MedianBaselinePrior;
    use crate::optimize::sample_rays;
    use crate::optimize::test_scenes::{close_rig, jittered};

    const OFFSET: f64 = 0.15;

    fn params() -> ConsistencyParams {
        ConsistencyParams::default().with_sigma_d((OFFSET / 3.0).powi(2))
    }

    fn eval(rig: &MultiViewRig, group: &CameraGroup) -> EnergyEval {
        let batch = sample_rays(group, rig, OFFSET, 9).unwrap();
        energy(&batch, group, rig, &params(), &MedianBaselinePrior)
    }

    #[test]
    fn gradient_matches_central_differences() {
        // a wide kernel keeps the O(h^2) truncation error of the central
        // difference well below the tolerance
        let offset: f64 = 0.3;
        let params = || ConsistencyParams::default().with_sigma_d((offset / 3.0).powi(2));
        let rig = jittered(&close_rig(2, 8, 0.3), 0.05, 1);
        let group = CameraGroup::new(0, vec![0, 1]);
        let batch = sample_rays(&group, &rig, offset, 9).unwrap();
        let analytic = energy(&batch, &group, &rig, &params(), &MedianBaselinePrior);
        let h = 1e-4 * rig.diameter();
        let mut tested = 0;
        for (slot, &j) in group.cameras.iter().enumerate() {
            for i in rig.views[j].mask.foreground_indices() {
                let d = rig.views[j].depth.get(i).unwrap();
                let mut r = rig.clone();
                r.views[j].depth.set(i, d + h);
                let ep = energy_value(&batch, &group, &r, &params(), &MedianBaselinePrior);
                r.views[j].depth.set(i, d - h);
                let em = energy_value(&batch, &group, &r, &params(), &MedianBaselinePrior);
                let fd = (ep - em) / (2.0 * h);
                let a = analytic.gradient[slot][i];
                let rel = (a - fd).abs() / a.abs().max(fd.abs()).max(1e-12);
                assert!(rel < 1e-4, "camera {j} pixel {i}: analytic {a} fd {fd}");
                tested += 1;
            }
        }
        assert!(tested >= 100, "{tested} pixels");
    }

    #[test]
    fn cameras_are_coupled_through_the_product() {
        // perturbing one camera's depth changes the other camera's gradient
        let rig = jittered(&close_rig(2, 8, 0.3), 0.05, 2);
        let group = CameraGroup::new(0, vec![0, 1]);
        let batch = sample_rays(&group, &rig, OFFSET, 9).unwrap();
        let base = energy(&batch, &group, &rig, &params(), &MedianBaselinePrior);
        let mut moved = rig.clone();
        for i in moved.views[1].mask.foreground_indices() {
            let d = moved.views[1].depth.get(i).unwrap();
            moved.views[1].depth.set(i, d + 0.01);
        }
        let after = energy(&batch, &group, &moved, &params(), &MedianBaselinePrior);
        let changed = base.gradient[0]
            .iter()
            .zip(&after.gradient[0])
            .filter(|(a, b)| (*a - *b).abs() > 1e-9 * a.abs().max(1.0))
            .count();
        assert!(changed > 32, "{changed} pixels changed");
    }

    #[test]
    fn single_camera_group_ignores_other_depths() {
        let rig = jittered(&close_rig(2, 8, 0.3), 0.05, 3);
        let group = CameraGroup::new(0, vec![0]);
        let batch = sample_rays(&group, &rig, OFFSET, 9).unwrap();
        let base = energy(&batch, &group, &rig, &params(), &MedianBaselinePrior);
        let moved = jittered(&rig, 0.1, 4);
        let mut moved_other = rig.clone();
        moved_other.views[1] = moved.views[1].clone();
        let after = energy(&batch, &group, &moved_other, &params(), &MedianBaselinePrior);
        assert_eq!(base, after);
    }

    #[test]
    fn ground_truth_beats_jittered_depths() {
        let truth = close_rig(4, 16, 0.5);
        let group = CameraGroup::new(0, vec![0, 1, 2, 3]);
        let at_truth = eval(&truth, &group).energy;
        for seed in 0..20 {
            let e = eval(&jittered(&truth, 0.5 * OFFSET, seed), &group).energy;
            assert!(at_truth > e, "seed {seed}: {at_truth} <= {e}");
        }
    }

    #[test]
    fn empty_batch_gives_zero() {
        let rig = close_rig(2, 8, 0.3);
        let group = CameraGroup::new(0, vec![0, 1]);
        let e = energy(
            &SampleBatch::default(),
            &group,
            &rig,
            &params(),
            &MedianBaselinePrior,
        );
        assert_eq!(e.energy, 0.0);
        assert_eq!(e.grad_norm(), 0.0);
    }

    #[test]
    fn result_does_not_depend_on_thread_count() {
        let rig = jittered(&close_rig(3, 24, 0.4), 0.05, 5);
        let group = CameraGroup::new(0, vec![0, 1, 2]);
        let pool = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
        let one = pool(1).install(|| eval(&rig, &group));
        let four = pool(4).install(|| eval(&rig, &group));
        assert_eq!(one, four);
        let batch = sample_rays(&group, &rig, OFFSET, 9).unwrap();
        let value = energy_value(&batch, &group, &rig, &params(), &MedianBaselinePrior);
        assert_eq!(value, one.energy);
    }
}
