//! Per-pixel grids: RGB images, silhouette masks and depth maps.
//!
//! All grids are row-major with pixel `(x, y)` stored at `y * width + x`.
//! Pixel centers sit on integer coordinates, so a continuous coordinate
//! `(u, v)` inside the image satisfies `0 <= u <= width - 1` and
//! `0 <= v <= height - 1`.

use std::fmt;

pub type Rgb = [f64; 3];

/// Dense row-major grid.
#[derive(Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

impl<T> Grid<T> {
    /// Wraps an existing buffer. Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "grid buffer size mismatch");
        Self { width, height, data }
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
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize) -> usize {
        y * self.width + x
    }

    #[inline]
    pub fn coords(&self, index: usize) -> (usize, usize) {
        (index % self.width, index / self.width)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> &T {
        &self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, value: T) {
        let w = self.width;
        self.data[y * w + x] = value;
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }
}

impl<T> fmt::Debug for Grid<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Grid")
            .field("width", &self.width)
            .field("height", &self.height)
            .finish_non_exhaustive()
    }
}

pub type RgbImage = Grid<Rgb>;

/// Foreground silhouette: `true` marks foreground.
pub type Mask = Grid<bool>;

impl Grid<bool> {
    pub fn foreground_count(&self) -> usize {
        self.data.iter().filter(|&&m| m).count()
    }

    /// Linear indices of foreground pixels, in increasing order.
    pub fn foreground_indices(&self) -> Vec<usize> {
        self.data
            .iter()
            .enumerate()
            .filter_map(|(i, &m)| m.then_some(i))
            .collect()
    }
}

impl Grid<Rgb> {
    /// Bilinear color lookup at a continuous pixel coordinate inside the image.
    pub fn sample_bilinear(&self, u: f64, v: f64) -> Option<Rgb> {
        let (taps, count) = bilinear_taps(self.width, self.height, u, v)?;
        let mut out = [0.0; 3];
        for &(idx, w) in &taps[..count] {
            let c = self.data[idx];
            out[0] += w * c[0];
            out[1] += w * c[1];
            out[2] += w * c[2];
        }
        Some(out)
    }
}

/// Bilinear taps for `(u, v)`: up to four `(linear index, weight)` pairs with
/// non-zero weight. Returns `None` outside `[0, w-1] x [0, h-1]`.
pub(crate) fn bilinear_taps(
    width: usize,
    height: usize,
    u: f64,
    v: f64,
) -> Option<([(usize, f64); 4], usize)> {
    if !(u >= 0.0 && v >= 0.0 && u <= (width - 1) as f64 && v <= (height - 1) as f64) {
        return None;
    }
    let x0 = u.floor() as usize;
    let y0 = v.floor() as usize;
    let fx = u - x0 as f64;
    let fy = v - y0 as f64;
    let mut taps = [(0usize, 0.0f64); 4];
    let mut n = 0;
    let xs: [(usize, f64); 2] = [(x0, 1.0 - fx), (x0 + 1, fx)];
    let ys: [(usize, f64); 2] = [(y0, 1.0 - fy), (y0 + 1, fy)];
    for &(y, wy) in &ys {
        if wy == 0.0 {
            continue;
        }
        for &(x, wx) in &xs {
            if wx == 0.0 {
                continue;
            }
            taps[n] = (y * width + x, wx * wy);
            n += 1;
        }
    }
    Some((taps, n))
}

/// Depth map storing Euclidean distance along each pixel ray.
///
/// Background pixels hold an explicit "no depth" state. Foreground depths are
/// always finite and strictly positive.
#[derive(Clone)]
pub struct DepthMap {
    width: usize,
    height: usize,
    // NaN encodes "no depth"; never exposed as a number.
    values: Vec<f64>,
}

/// Equal when the sizes match and every pixel holds the same depth or none.
impl PartialEq for DepthMap {
    fn eq(&self, other: &Self) -> bool {
        self.width == other.width
            && self.height == other.height
            && (0..self.len()).all(|i| self.get(i) == other.get(i))
    }
}

impl fmt::Debug for DepthMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DepthMap")
            .field("width", &self.width)
            .field("height", &self.height)
            .field("valid", &self.valid_count())
            .finish()
    }
}

impl DepthMap {
    /// A map with no depth anywhere.
    pub fn empty(width: usize, height: usize) -> Self {
        Self {
            width,
            height,
            values: vec![f64::NAN; width * height],
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    #[inline]
    pub fn get(&self, index: usize) -> Option<f64> {
        let d = self.values[index];
        (!d.is_nan()).then_some(d)
    }

    #[inline]
    pub fn get_xy(&self, x: usize, y: usize) -> Option<f64> {
        self.get(y * self.width + x)
    }

    /// Sets a depth. Panics on non-finite or non-positive values.
    #[inline]
    pub fn set(&mut self, index: usize, depth: f64) {
        assert!(
            depth.is_finite() && depth > 0.0,
            "depth must be finite and positive, got {depth}"
        );
        self.values[index] = depth;
    }

    #[inline]
    pub fn clear(&mut self, index: usize) {
        self.values[index] = f64::NAN;
    }

    #[inline]
    pub fn has_depth(&self, index: usize) -> bool {
        !self.values[index].is_nan()
    }

    pub fn valid_count(&self) -> usize {
        self.values.iter().filter(|d| !d.is_nan()).count()
    }

    /// Depths with `fill` substituted for "no depth".
    pub fn to_dense(&self, fill: f64) -> Vec<f64> {
        self.values
            .iter()
            .map(|&d| if d.is_nan() { fill } else { d })
            .collect()
    }

    /// Clears every pixel where `mask` is background.
    pub fn apply_mask(&mut self, mask: &Mask) {
        assert!(mask.width() == self.width && mask.height() == self.height);
        for (d, &m) in self.values.iter_mut().zip(mask.as_slice()) {
            if !m {
                *d = f64::NAN;
            }
        }
    }

    /// True iff depth is present exactly on the mask foreground.
    pub fn matches_mask(&self, mask: &Mask) -> bool {
        mask.width() == self.width
            && mask.height() == self.height
            && self
                .values
                .iter()
                .zip(mask.as_slice())
                .all(|(d, &m)| m == !d.is_nan())
    }
}
