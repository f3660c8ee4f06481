//! Plain-text camera lists.
//!
//! One camera per line, 16 whitespace-separated numbers:
//!
//! ```text
//! fx fy cx cy  r00 r01 r02 r10 r11 r12 r20 r21 r22  tx ty tz
//! ```
//!
//! The rotation is row-major and, with the translation, maps world points to
//! camera coordinates. Blank lines and lines starting with `#` are ignored.
//! Image sizes are not stored; they come from the images.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};

use super::{read_file, write_file, IoError};
use crate::geometry::{GeometryError, Intrinsics, PinholeCamera};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraRecord {
    pub intrinsics: Intrinsics,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraRecord {
    pub fn from_camera(cam: &PinholeCamera) -> Self {
        Self {
            intrinsics: cam.intrinsics(),
            rotation: *cam.rotation(),
            translation: *cam.translation(),
        }
    }

    pub fn to_camera(&self, width: usize, height: usize) -> Result<PinholeCamera, GeometryError> {
        PinholeCamera::new(self.intrinsics, self.rotation, self.translation, width, height)
    }
}

pub fn write_cameras(path: &Path, cameras: &[CameraRecord]) -> Result<(), IoError> {
    let mut s = String::from("# fx fy cx cy r00 r01 r02 r10 r11 r12 r20 r21 r22 tx ty tz\n");
    for c in cameras {
        let k = c.intrinsics;
        let mut nums = vec![k.fx, k.fy, k.cx, k.cy];
        for r in 0..3 {
            for col in 0..3 {
                nums.push(c.rotation[(r, col)]);
            }
        }
        nums.extend(c.translation.iter());
        let line: Vec<String> = nums.iter().map(|v| format!("{v:?}")).collect();
        let _ = writeln!(s, "{}", line.join(" "));
    }
    write_file(path, s.as_bytes())
}

pub fn read_cameras(path: &Path) -> Result<Vec<CameraRecord>, IoError> {
    let bytes = read_file(path)?;
    let text = String::from_utf8(bytes).map_err(|_| IoError::format(path, "not UTF-8"))?;
    let mut out = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let nums: Result<Vec<f64>, _> = line.split_whitespace().map(str::parse::<f64>).collect();
        let nums = nums.map_err(|e| IoError::format(path, format!("line {}: {e}", lineno + 1)))?;
        if nums.len() != 16 {
            return Err(IoError::format(
                path,
                format!("line {}: expected 16 numbers, found {}", lineno + 1, nums.len()),
            ));
        }
        out.push(CameraRecord {
            intrinsics: Intrinsics {
                fx: nums[0],
                fy: nums[1],
                cx: nums[2],
                cy: nums[3],
            },
            rotation: Matrix3::from_row_slice(&nums[4..13]),
            translation: Vector3::new(nums[13], nums[14], nums[15]),
        });
    }
    Ok(out)
}
