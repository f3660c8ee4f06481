//! Edge-preserving depth smoothing.

use rayon::prelude::*;

use crate::geometry::{DepthMap, Mask};

/// Bilateral filter over foreground pixels. Each output is the average of
/// the foreground depths within `3 * sigma_s` pixels, weighted by a spatial
/// Gaussian (`sigma_s`, pixels) and a depth-range Gaussian (`sigma_r`, world
/// units). Background pixels stay without depth.
///
/// Range weights are measured from the median depth of the window rather
/// than from the pixel itself, so isolated outliers are pulled back to their
/// surroundings while steps between two populated sides are kept.
pub fn bilateral_filter(depth: &DepthMap, mask: &Mask, sigma_s: f64, sigma_r: f64) -> DepthMap {
    assert!(
        sigma_s > 0.0 && sigma_r > 0.0,
        "bilateral sigmas must be positive"
    );
    let (w, h) = (depth.width(), depth.height());
    let radius = (3.0 * sigma_s).ceil() as i64;
    let spatial: Vec<f64> = (-radius..=radius)
        .flat_map(|dy| (-radius..=radius).map(move |dx| (dx, dy)))
        .map(|(dx, dy)| (-((dx * dx + dy * dy) as f64) / (2.0 * sigma_s * sigma_s)).exp())
        .collect();
    let side = (2 * radius + 1) as usize;
    let inv_r = 1.0 / (2.0 * sigma_r * sigma_r);
    let rows: Vec<Vec<(usize, f64)>> = (0..h)
        .into_par_iter()
        .map(|y| {
            let mut out = Vec::new();
            let mut window: Vec<(f64, f64)> = Vec::new();
            let mut scratch: Vec<f64> = Vec::new();
            for x in 0..w {
                let i = y * w + x;
                if !mask.as_slice()[i] {
                    continue;
                }
                if !depth.has_depth(i) {
                    continue;
                }
                window.clear();
                for dy in -radius..=radius {
                    let yy = y as i64 + dy;
                    if yy < 0 || yy >= h as i64 {
                        continue;
                    }
                    for dx in -radius..=radius {
                        let xx = x as i64 + dx;
                        if xx < 0 || xx >= w as i64 {
                            continue;
                        }
                        let j = yy as usize * w + xx as usize;
                        if !mask.as_slice()[j] {
                            continue;
                        }
                        let Some(d) = depth.get(j) else { continue };
                        window.push((d, spatial[(dy + radius) as usize * side + (dx + radius) as usize]));
                    }
                }
                scratch.clear();
                scratch.extend(window.iter().map(|&(d, _)| d));
                let mid = (scratch.len() - 1) / 2;
                let (_, &mut reference, _) = scratch.select_nth_unstable_by(mid, f64::total_cmp);
                let (mut num, mut den) = (0.0, 0.0);
                for &(d, ws) in &window {
                    let wt = ws * (-(d - reference).powi(2) * inv_r).exp();
                    num += wt * (d - reference);
                    den += wt;
                }
                out.push((i, reference + num / den));
            }
            out
        })
        .collect();
    let mut filtered = DepthMap::empty(w, h);
    for (i, d) in rows.into_iter().flatten() {
        filtered.set(i, d);
    }
    filtered
}
