//! Single-channel float32 grids.
//!
//! PFM files are written little-endian (scale `-1.0`) with rows stored bottom
//! to top, as the format requires. The raw format is a 16-byte header
//! (`b"SRDF"`, version `1u32`, width `u32`, height `u32`, all little-endian)
//! followed by `width * height` little-endian `f32` values, top row first.
//!
//! Depth maps are exported with `0.0` for "no depth".

use std::path::Path;

use super::{read_file, write_file, IoError};
use crate::geometry::DepthMap;

const RAW_MAGIC: &[u8; 4] = b"SRDF";
const RAW_VERSION: u32 = 1;

/// Row-major (top row first) float32 grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FloatGrid {
    pub width: usize,
    pub height: usize,
    pub data: Vec<f32>,
}

impl FloatGrid {
    pub fn from_depth(depth: &DepthMap) -> Self {
        Self {
            width: depth.width(),
            height: depth.height(),
            data: depth.to_dense(0.0).into_iter().map(|d| d as f32).collect(),
        }
    }
}

pub fn encode_pfm(grid: &FloatGrid) -> Vec<u8> {
    let mut out = format!("Pf\n{} {}\n-1.0\n", grid.width, grid.height).into_bytes();
    out.reserve(grid.data.len() * 4);
    for row in (0..grid.height).rev() {
        for v in &grid.data[row * grid.width..(row + 1) * grid.width] {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

pub fn write_pfm(path: &Path, grid: &FloatGrid) -> Result<(), IoError> {
    write_file(path, &encode_pfm(grid))
}

pub fn write_depth_pfm(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    write_pfm(path, &FloatGrid::from_depth(depth))
}

fn next_token<'a>(bytes: &'a [u8], pos: &mut usize) -> Option<&'a str> {
    while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    (start < *pos).then(|| std::str::from_utf8(&bytes[start..*pos]).ok())?
}

pub fn decode_pfm(bytes: &[u8], path: &Path) -> Result<FloatGrid, IoError> {
    let bad = |m: &str| IoError::format(path, format!("PFM: {m}"));
    let mut pos = 0;
    match next_token(bytes, &mut pos) {
        Some("Pf") => {}
        Some("PF") => return Err(bad("three-channel PFM is not a depth map")),
        _ => return Err(bad("missing 'Pf' magic")),
    }
    let width: usize = next_token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad width"))?;
    let height: usize = next_token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad height"))?;
    let scale: f64 = next_token(bytes, &mut pos)
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| bad("bad scale"))?;
    // exactly one whitespace byte separates the header from the data
    pos += 1;
    let n = width * height;
    if bytes.len() < pos + 4 * n {
        return Err(bad("truncated data"));
    }
    let little = scale < 0.0;
    let mut data = vec![0.0f32; n];
    for row in 0..height {
        let dst_row = height - 1 - row;
        for x in 0..width {
            let off = pos + 4 * (row * width + x);
            let raw: [u8; 4] = bytes[off..off + 4].try_into().unwrap();
            data[dst_row * width + x] = if little {
                f32::from_le_bytes(raw)
            } else {
                f32::from_be_bytes(raw)
            };
        }
    }
    Ok(FloatGrid { width, height, data })
}

pub fn read_pfm(path: &Path) -> Result<FloatGrid, IoError> {
    decode_pfm(&read_file(path)?, path)
}

pub fn encode_raw(grid: &FloatGrid) -> Vec<u8> {
    let mut out = Vec::with_capacity(16 + 4 * grid.data.len());
    out.extend_from_slice(RAW_MAGIC);
    out.extend_from_slice(&RAW_VERSION.to_le_bytes());
    out.extend_from_slice(&(grid.width as u32).to_le_bytes());
    out.extend_from_slice(&(grid.height as u32).to_le_bytes());
    for v in &grid.data {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_raw_grid(path: &Path, grid: &FloatGrid) -> Result<(), IoError> {
    write_file(path, &encode_raw(grid))
}

pub fn write_depth_raw(path: &Path, depth: &DepthMap) -> Result<(), IoError> {
    write_raw_grid(path, &FloatGrid::from_depth(depth))
}

pub fn decode_raw(bytes: &[u8], path: &Path) -> Result<FloatGrid, IoError> {
    let bad = |m: &str| IoError::format(path, format!("raw grid: {m}"));
    if bytes.len() < 16 || &bytes[..4] != RAW_MAGIC {
        return Err(bad("missing SRDF header"));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[i..i + 4].try_into().unwrap());
    if word(4) != RAW_VERSION {
        return Err(bad("unsupported version"));
    }
    let (width, height) = (word(8) as usize, word(12) as usize);
    let n = width * height;
    if bytes.len() != 16 + 4 * n {
        return Err(bad("size does not match header"));
    }
    let data = bytes[16..]
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(FloatGrid { width, height, data })
}

pub fn read_raw_grid(path: &Path) -> Result<FloatGrid, IoError> {
    decode_raw(&read_file(path)?, path)
}

/// Reads a PFM or raw grid, chosen by extension (`.pfm`, else raw).
pub fn read_depth_grid(path: &Path) -> Result<FloatGrid, IoError> {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("pfm") => read_pfm(path),
        _ => read_raw_grid(path),
    }
}
