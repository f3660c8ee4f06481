//! Per-sample consistency signals.
//!
//! Both signals are products over the cameras of the active group, each
//! camera contributing `exp(-r^2 / sigma) + gamma`. Cameras that cannot
//! observe the sample contribute the bare floor `gamma`, so a group of `n`
//! cameras always scores in `(gamma^n, (1 + gamma)^n]`.
//!
//! The photometric term sits behind the [`PhotoPrior`] trait. The shipped
//! prior compares every observed color to the channel-wise median of the
//! observations; other priors plug in through a [`PriorRegistry`].

use std::collections::BTreeMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{MultiViewRig, Occlusion, RaySample, Rgb};

#[derive(Debug, Error, PartialEq)]
pub enum ConsistencyError {
    #[error("invalid consistency parameter: {0}")]
    InvalidParams(String),
    #[error("unknown photo-consistency prior '{0}'")]
    UnknownPrior(String),
    #[error("no camera observes the sample")]
    NoVisibility,
}

/// How the median of an even number of observations is taken.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MedianMode {
    /// Lower of the two middle elements, so the median is an observed color.
    #[default]
    Lower,
    /// Mean of the two middle elements.
    Average,
}

/// Scalar hyper-parameters of the two consistency products.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyParams {
    /// Squared-distance scale of the SRDF kernel (world units squared).
    pub sigma_d: f64,
    /// Squared-color scale of the photometric kernel.
    pub sigma_c: f64,
    pub gamma_srdf: f64,
    pub gamma_phi: f64,
    pub median: MedianMode,
}

impl Default for ConsistencyParams {
    fn default() -> Self {
        Self {
            sigma_d: 1e-4,
            sigma_c: 0.02,
            gamma_srdf: 0.05,
            gamma_phi: 0.05,
            median: MedianMode::Lower,
        }
    }
}

impl ConsistencyParams {
    pub fn validate(&self) -> Result<(), ConsistencyError> {
        let bad = |m: String| Err(ConsistencyError::InvalidParams(m));
        if !(self.sigma_d > 0.0 && self.sigma_d.is_finite()) {
            return bad(format!("sigma_d must be > 0, got {}", self.sigma_d));
        }
        if !(self.sigma_c > 0.0 && self.sigma_c.is_finite()) {
            return bad(format!("sigma_c must be > 0, got {}", self.sigma_c));
        }
        if !(self.gamma_srdf > 0.0 && self.gamma_srdf < 1.0) {
            return bad(format!("gamma_srdf must be in (0,1), got {}", self.gamma_srdf));
        }
        if !(self.gamma_phi > 0.0 && self.gamma_phi < 1.0) {
            return bad(format!("gamma_phi must be in (0,1), got {}", self.gamma_phi));
        }
        Ok(())
    }

    pub fn with_sigma_d(mut self, sigma_d: f64) -> Self {
        self.sigma_d = sigma_d;
        self
    }
}

/// Value of the SRDF consistency product and its partial derivatives.
#[derive(Debug, Clone, PartialEq)]
pub struct SrdfConsistency {
    pub value: f64,
    /// `d value / d s_k` per camera; zero for occluded cameras.
    pub partials: Vec<f64>,
}

/// SRDF consistency over a camera group; `None` entries are occluded cameras.
pub fn c_srdf(srdf: &[Option<f64>], params: &ConsistencyParams) -> Result<SrdfConsistency, ConsistencyError> {
    let mut partials = vec![0.0; srdf.len()];
    let value = c_srdf_into(srdf, params.sigma_d, params.gamma_srdf, &mut partials)
        .ok_or(ConsistencyError::NoVisibility)?;
    Ok(SrdfConsistency { value, partials })
}

/// Allocation-free core of [`c_srdf`]. `partials` must have `srdf.len()`
/// entries. Returns `None` when no camera is valid.
#[inline]
pub fn c_srdf_into(srdf: &[Option<f64>], sigma_d: f64, gamma: f64, partials: &mut [f64]) -> Option<f64> {
    debug_assert_eq!(srdf.len(), partials.len());
    let n = srdf.len();
    // prefix products into partials, then sweep back with the suffix product
    let mut prefix = 1.0;
    let mut any = false;
    for k in 0..n {
        partials[k] = prefix;
        let f = match srdf[k] {
            Some(s) => {
                any = true;
                (-s * s / sigma_d).exp() + gamma
            }
            None => gamma,
        };
        prefix *= f;
    }
    if !any {
        partials.iter_mut().for_each(|p| *p = 0.0);
        return None;
    }
    let mut suffix = 1.0;
    for k in (0..n).rev() {
        match srdf[k] {
            Some(s) => {
                let e = (-s * s / sigma_d).exp();
                partials[k] *= suffix * e * (-2.0 * s / sigma_d);
                suffix *= e + gamma;
            }
            None => {
                partials[k] = 0.0;
                suffix *= gamma;
            }
        }
    }
    Some(prefix)
}

/// Channel-wise median of the observed colors.
pub fn median_color(colors: &[Rgb], mode: MedianMode) -> Option<Rgb> {
    if colors.is_empty() {
        return None;
    }
    let mut channel: Vec<f64> = Vec::with_capacity(colors.len());
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        channel.clear();
        channel.extend(colors.iter().map(|rgb| rgb[c]));
        *slot = median_in_place(&mut channel, mode);
    }
    Some(out)
}

fn median_in_place(values: &mut [f64], mode: MedianMode) -> f64 {
    values.sort_unstable_by(|a, b| a.total_cmp(b));
    let n = values.len();
    let lower = values[(n - 1) / 2];
    match mode {
        MedianMode::Average if n % 2 == 0 => 0.5 * (lower + values[n / 2]),
        _ => lower,
    }
}

/// Baseline photo-consistency: product of `exp(-|c_j - median|^2 / sigma_c) + gamma`.
/// `None` entries are occluded cameras and contribute `gamma`.
pub fn c_phi_baseline(colors: &[Option<Rgb>], params: &ConsistencyParams) -> Result<f64, ConsistencyError> {
    let observed: Vec<Rgb> = colors.iter().flatten().copied().collect();
    let median = median_color(&observed, params.median).ok_or(ConsistencyError::NoVisibility)?;
    Ok(colors
        .iter()
        .map(|c| match c {
            Some(c) => {
                let d2 = (c[0] - median[0]).powi(2) + (c[1] - median[1]).powi(2) + (c[2] - median[2]).powi(2);
                (-d2 / params.sigma_c).exp() + params.gamma_phi
            }
            None => params.gamma_phi,
        })
        .product())
}

/// One camera's view of a sample.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub color: Rgb,
    pub u: f64,
    pub v: f64,
}

/// Everything a photo-consistency prior may look at for one sample.
pub struct PriorContext<'a> {
    pub sample: &'a RaySample,
    pub rig: &'a MultiViewRig,
    /// Rig indices of the active group's cameras.
    pub group: &'a [usize],
    /// Aligned with `group`; `None` marks an occluded camera.
    pub observations: &'a [Option<Observation>],
}

/// Photo-consistency measure. Implementations must return a score in
/// `(0, (1 + gamma_phi)^n]` for a group of `n` cameras.
pub trait PhotoPrior: Send + Sync {
    fn name(&self) -> &str;
    fn score(&self, ctx: &PriorContext<'_>, params: &ConsistencyParams) -> f64;
}

impl fmt::Debug for dyn PhotoPrior {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PhotoPrior({})", self.name())
    }
}

pub const MEDIAN_BASELINE: &str = "median-baseline";

/// Lambertian median prior.
#[derive(Debug, Default, Clone, Copy)]
pub struct MedianBaselinePrior;

impl PhotoPrior for MedianBaselinePrior {
    fn name(&self) -> &str {
        MEDIAN_BASELINE
    }

    fn score(&self, ctx: &PriorContext<'_>, params: &ConsistencyParams) -> f64 {
        let mut observed = [[0.0; 3]; 32];
        let colors: Vec<Rgb>;
        let slice: &[Rgb] = if ctx.observations.len() <= observed.len() {
            let mut n = 0;
            for o in ctx.observations.iter().flatten() {
                observed[n] = o.color;
                n += 1;
            }
            &observed[..n]
        } else {
            colors = ctx.observations.iter().flatten().map(|o| o.color).collect();
            &colors
        };
        let Some(median) = median_small(slice, params.median) else {
            return params.gamma_phi.powi(ctx.observations.len() as i32);
        };
        ctx.observations
            .iter()
            .map(|o| match o {
                Some(o) => {
                    let c = o.color;
                    let d2 =
                        (c[0] - median[0]).powi(2) + (c[1] - median[1]).powi(2) + (c[2] - median[2]).powi(2);
                    (-d2 / params.sigma_c).exp() + params.gamma_phi
                }
                None => params.gamma_phi,
            })
            .product()
    }
}

// median_color without the heap for small groups
fn median_small(colors: &[Rgb], mode: MedianMode) -> Option<Rgb> {
    if colors.is_empty() {
        return None;
    }
    if colors.len() > 32 {
        return median_color(colors, mode);
    }
    let mut buf = [0.0; 32];
    let mut out = [0.0; 3];
    for (c, slot) in out.iter_mut().enumerate() {
        for (b, rgb) in buf.iter_mut().zip(colors) {
            *b = rgb[c];
        }
        *slot = median_in_place(&mut buf[..colors.len()], mode);
    }
    Some(out)
}

/// Named photo-consistency priors available to a run.
#[derive(Clone)]
pub struct PriorRegistry {
    priors: BTreeMap<String, Arc<dyn PhotoPrior>>,
}

impl fmt::Debug for PriorRegistry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_list().entries(self.priors.keys()).finish()
    }
}

impl Default for PriorRegistry {
    fn default() -> Self {
        Self::with_builtins()
    }
}

impl PriorRegistry {
    pub fn empty() -> Self {
        Self {
            priors: BTreeMap::new(),
        }
    }

    pub fn with_builtins() -> Self {
        let mut r = Self::empty();
        r.register(Arc::new(MedianBaselinePrior));
        r
    }

    /// Adds or replaces a prior under its own name.
    pub fn register(&mut self, prior: Arc<dyn PhotoPrior>) {
        self.priors.insert(prior.name().to_string(), prior);
    }

    pub fn get(&self, name: &str) -> Result<Arc<dyn PhotoPrior>, ConsistencyError> {
        self.priors
            .get(name)
            .cloned()
            .ok_or_else(|| ConsistencyError::UnknownPrior(name.to_string()))
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.priors.keys().map(String::as_str)
    }
}

/// Observation of `point` by one view, using the same validity rule as the
/// SRDF term: the camera must see the point and its depth lookup must be valid.
#[inline]
pub(crate) fn observe(
    rig: &MultiViewRig,
    camera: usize,
    point: &nalgebra::Point3<f64>,
) -> Result<(Observation, crate::geometry::DepthLookup, f64), Occlusion> {
    let view = &rig.views[camera];
    let p = view.project(point)?;
    let lookup = view.interpolate_depth(p.u, p.v)?;
    let color = view.image.sample_bilinear(p.u, p.v).ok_or(Occlusion::OutOfView)?;
    Ok((
        Observation {
            color,
            u: p.u,
            v: p.v,
        },
        lookup,
        p.ray_distance,
    ))
}

/// Observations of a sample by every camera of `group`.
pub fn observe_group(sample: &RaySample, rig: &MultiViewRig, group: &[usize]) -> Vec<Option<Observation>> {
    group
        .iter()
        .map(|&k| observe(rig, k, &sample.point).ok().map(|(o, _, _)| o))
        .collect()
}

/// Photo-consistency of `sample` under `prior`. Returns the score and whether
/// any camera of the group observes the sample.
pub fn photo_prior_interface(
    sample: &RaySample,
    rig: &MultiViewRig,
    group: &[usize],
    prior: &dyn PhotoPrior,
    params: &ConsistencyParams,
) -> (f64, bool) {
    let observations = observe_group(sample, rig, group);
    let valid = observations.iter().any(Option::is_some);
    let ctx = PriorContext {
        sample,
        rig,
        group,
        observations: &observations,
    };
    (prior.score(&ctx, params), valid)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute_c_srdf(s: &[Option<f64>], sigma: f64, gamma: f64) -> f64 {
        let mut v = 1.0;
        for x in s {
            v *= match x {
                Some(x) => (-(x * x) / sigma).exp() + gamma,
                None => gamma,
            };
        }
        v
    }

    #[test]
    fn c_srdf_all_zero_three_cameras() {
        let p = ConsistencyParams {
            gamma_srdf: 0.05,
            ..Default::default()
        };
        let r = c_srdf(&[Some(0.0); 3], &p).unwrap();
        let oracle = 1.05f64 * 1.05 * 1.05;
        assert!((r.value - oracle).abs() < 1e-15);
        assert!((r.value - 1.157625).abs() < 1e-12);
        assert!(r.partials.iter().all(|&d| d == 0.0));
    }

    #[test]
    fn c_srdf_single_camera_peak() {
        let mut partials = [1.0];
        let v = c_srdf_into(&[Some(0.0)], 0.1, 1e-300, &mut partials).unwrap();
        assert!((v - 1.0).abs() < 1e-15);
        assert_eq!(partials[0], 0.0);
    }

    #[test]
    fn c_srdf_tail_limit() {
        let p = ConsistencyParams::default();
        let r = c_srdf(&[Some(1e6), Some(-1e6), Some(1e6)], &p).unwrap();
        assert!((r.value - p.gamma_srdf.powi(3)).abs() < 1e-18);
    }

    #[test]
    fn c_srdf_no_visibility() {
        let p = ConsistencyParams::default();
        assert_eq!(c_srdf(&[None, None], &p), Err(ConsistencyError::NoVisibility));
    }

    #[test]
    fn c_srdf_matches_brute_force_with_occlusion() {
        let s = [Some(0.01), None, Some(-0.02), Some(0.005)];
        let r = c_srdf(&s, &ConsistencyParams::default().with_sigma_d(4e-4)).unwrap();
        let b = brute_c_srdf(&s, 4e-4, 0.05);
        assert!((r.value - b).abs() <= 1e-15 * b);
        assert_eq!(r.partials[1], 0.0);
    }

    #[test]
    fn median_rules() {
        let c = |x: f64| [x, x, x];
        let m = median_color(&[c(0.2), c(0.5), c(0.9)], MedianMode::Lower).unwrap();
        assert_eq!(m[0], 0.5);
        let m = median_color(&[c(0.9), c(0.2), c(0.95), c(0.5)], MedianMode::Lower).unwrap();
        assert_eq!(m[0], 0.5);
        let m = median_color(&[c(0.9), c(0.2), c(0.95), c(0.5)], MedianMode::Average).unwrap();
        assert!((m[0] - 0.7).abs() < 1e-15);
        assert!(median_color(&[], MedianMode::Lower).is_none());
    }

    #[test]
    fn median_is_channel_wise() {
        let m = median_color(
            &[[0.1, 0.9, 0.5], [0.2, 0.8, 0.4], [0.3, 0.7, 0.6]],
            MedianMode::Lower,
        )
        .unwrap();
        assert_eq!(m, [0.2, 0.8, 0.5]);
    }

    #[test]
    fn c_phi_identical_colors() {
        let p = ConsistencyParams::default();
        let v = c_phi_baseline(&[Some([0.3, 0.6, 0.1]); 4], &p).unwrap();
        assert!((v - 1.21550625).abs() < 1e-12);
        assert!((v - 1.05f64.powi(4)).abs() < 1e-15);
    }

    #[test]
    fn c_phi_spread_colors_near_floor() {
        let p = ConsistencyParams {
            sigma_c: 1e-3,
            ..Default::default()
        };
        let v = c_phi_baseline(
            &[
                Some([0.0; 3]),
                Some([1.0; 3]),
                Some([0.0, 1.0, 0.0]),
                Some([1.0, 0.0, 1.0]),
            ],
            &p,
        )
        .unwrap();
        // the median color itself is observed once, so one factor is 1 + gamma
        assert!(v > p.gamma_phi.powi(4));
        assert!(v < 1.1 * (1.0 + p.gamma_phi) * p.gamma_phi.powi(3));
    }

    #[test]
    fn unknown_prior_is_rejected() {
        let r = PriorRegistry::with_builtins();
        assert!(r.get(MEDIAN_BASELINE).is_ok());
        assert_eq!(
            r.get("cnn").unwrap_err(),
            ConsistencyError::UnknownPrior("cnn".into())
        );
    }

    #[test]
    fn params_validation() {
        assert!(ConsistencyParams::default().validate().is_ok());
        let mut p = ConsistencyParams {
            gamma_phi: 1.0,
            ..ConsistencyParams::default()
        };
        assert!(p.validate().is_err());
        p = ConsistencyParams::default();
        p.sigma_d = 0.0;
        assert!(p.validate().is_err());
    }

    proptest::proptest! {
        #[test]
        fn c_srdf_stays_within_its_bounds_and_ignores_order(
            srdf in proptest::collection::vec(proptest::option::of(-0.3f64..0.3), 1..8),
            shift in 0usize..8,
        ) {
            let (sigma, gamma) = (0.01, 0.05);
            let mut partials = vec![0.0; srdf.len()];
            let value = c_srdf_into(&srdf, sigma, gamma, &mut partials);
            let n = srdf.len() as i32;
            match value {
                None => proptest::prop_assert!(srdf.iter().all(Option::is_none)),
                Some(v) => {
                    proptest::prop_assert!(v > gamma.powi(n) && v <= (1.0 + gamma).powi(n));
                    let mut rotated = srdf.clone();
                    rotated.rotate_left(shift % srdf.len());
                    let mut p2 = vec![0.0; srdf.len()];
                    let w = c_srdf_into(&rotated, sigma, gamma, &mut p2).unwrap();
                    proptest::prop_assert!((v - w).abs() <= 1e-12 * v);
                }
            }
        }

        #[test]
        fn c_srdf_partials_match_finite_differences(
            srdf in proptest::collection::vec(proptest::option::of(-0.3f64..0.3), 1..6),
        ) {
            let (sigma, gamma, h) = (0.01, 0.05, 1e-6);
            let mut partials = vec![0.0; srdf.len()];
            if c_srdf_into(&srdf, sigma, gamma, &mut partials).is_none() {
                return Ok(());
            }
            let mut scratch = vec![0.0; srdf.len()];
            for k in 0..srdf.len() {
                let Some(s) = srdf[k] else {
                    proptest::prop_assert_eq!(partials[k], 0.0);
                    continue;
                };
                let mut moved = srdf.clone();
                moved[k] = Some(s + h);
                let up = c_srdf_into(&moved, sigma, gamma, &mut scratch).unwrap();
                moved[k] = Some(s - h);
                let down = c_srdf_into(&moved, sigma, gamma, &mut scratch).unwrap();
                let fd = (up - down) / (2.0 * h);
                proptest::prop_assert!((partials[k] - fd).abs() <= 1e-6 * fd.abs().max(1.0));
            }
        }

        #[test]
        fn c_phi_stays_within_its_bounds_and_ignores_order(
            colors in proptest::collection::vec(proptest::option::of(proptest::array::uniform3(0.0f64..1.0)), 1..8),
            shift in 0usize..8,
        ) {
            let params = ConsistencyParams::default();
            let n = colors.len() as i32;
            match c_phi_baseline(&colors, &params) {
                Err(_) => proptest::prop_assert!(colors.iter().all(Option::is_none)),
                Ok(v) => {
                    let g = params.gamma_phi;
                    proptest::prop_assert!(v > g.powi(n) && v <= (1.0 + g).powi(n));
                    let mut rotated = colors.clone();
                    rotated.rotate_left(shift % colors.len());
                    let w = c_phi_baseline(&rotated, &params).unwrap();
                    proptest::prop_assert!((v - w).abs() <= 1e-12 * v);
                }
            }
        }
    }
}
