use std::path::Path;

use super::{read_file, write_file, IoError};
use crate::geometry::{Mask, RgbImage};

fn encode_png(width: usize, height: usize, color: png::ColorType, data: &[u8]) -> Vec<u8> {
    let mut out = Vec::new();
    {
        let mut enc = png::Encoder::new(&mut out, width as u32, height as u32);
        enc.set_color(color);
        enc.set_depth(png::BitDepth::Eight);
        let mut w = enc.write_header().expect("png header to memory");
        w.write_image_data(data).expect("png data to memory");
    }
    out
}

struct Decoded {
    width: usize,
    height: usize,
    channels: usize,
    bits16: bool,
    data: Vec<u8>,
}

fn decode_png(bytes: &[u8], path: &Path) -> Result<Decoded, IoError> {
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::EXPAND);
    let mut reader = decoder
        .read_info()
        .map_err(|e| IoError::format(path, format!("PNG: {e}")))?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| IoError::format(path, "PNG: image too large"))?;
    let mut buf = vec![0; size];
    let info = reader
        .next_frame(&mut buf)
        .map_err(|e| IoError::format(path, format!("PNG: {e}")))?;
    buf.truncate(info.buffer_size());
    let channels = info.color_type.samples();
    Ok(Decoded {
        width: info.width as usize,
        height: info.height as usize,
        channels,
        bits16: info.bit_depth == png::BitDepth::Sixteen,
        data: buf,
    })
}

impl Decoded {
    fn sample(&self, pixel: usize, channel: usize) -> f64 {
        let i = pixel * self.channels + channel;
        if self.bits16 {
            u16::from_be_bytes([self.data[2 * i], self.data[2 * i + 1]]) as f64 / 65535.0
        } else {
            self.data[i] as f64 / 255.0
        }
    }
}

/// Writes an 8-bit RGB PNG; channel values are clamped to `[0, 1]`.
pub fn write_rgb_png(path: &Path, image: &RgbImage) -> Result<(), IoError> {
    let data: Vec<u8> = image
        .as_slice()
        .iter()
        .flat_map(|c| c.map(|v| (v.clamp(0.0, 1.0) * 255.0).round() as u8))
        .collect();
    write_file(
        path,
        &encode_png(image.width(), image.height(), png::ColorType::Rgb, &data),
    )
}

/// Reads gray, gray-alpha, RGB or RGBA PNGs (8 or 16 bit) as RGB in `[0, 1]`.
pub fn read_rgb_png(path: &Path) -> Result<RgbImage, IoError> {
    let d = decode_png(&read_file(path)?, path)?;
    let n = d.width * d.height;
    let pixels = (0..n)
        .map(|p| match d.channels {
            1 | 2 => {
                let g = d.sample(p, 0);
                [g, g, g]
            }
            _ => [d.sample(p, 0), d.sample(p, 1), d.sample(p, 2)],
        })
        .collect();
    Ok(RgbImage::from_vec(d.width, d.height, pixels))
}

/// Single-channel 8-bit mask: 255 foreground, 0 background.
pub fn write_mask_png(path: &Path, mask: &Mask) -> Result<(), IoError> {
    let data: Vec<u8> = mask.as_slice().iter().map(|&m| if m { 255 } else { 0 }).collect();
    write_file(
        path,
        &encode_png(mask.width(), mask.height(), png::ColorType::Grayscale, &data),
    )
}

/// Reads a mask; values above one half of full scale are foreground.
pub fn read_mask_png(path: &Path) -> Result<Mask, IoError> {
    let d = decode_png(&read_file(path)?, path)?;
    let n = d.width * d.height;
    let fg = (0..n).map(|p| d.sample(p, 0) > 0.5).collect();
    Ok(Mask::from_vec(d.width, d.height, fg))
}
