//! File formats: depth grids (PFM, raw float32), PNG images and masks,
//! plain-text camera lists and PLY/OBJ meshes.

mod cameras;
mod depth;
mod image;
mod mesh;

pub use cameras::{read_cameras, write_cameras, CameraRecord};
pub use depth::{
    read_depth_grid, read_pfm, read_raw_grid, write_depth_pfm, write_depth_raw, write_pfm, write_raw_grid,
    FloatGrid,
};
pub use image::{read_mask_png, read_rgb_png, write_mask_png, write_rgb_png};
pub use mesh::{read_mesh, read_obj, read_ply, write_obj, write_ply};

use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum IoError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl IoError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        IoError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub(crate) fn format(path: &Path, message: impl Into<String>) -> Self {
        IoError::Format {
            path: path.to_path_buf(),
            message: message.into(),
        }
    }

    pub fn path(&self) -> &Path {
        match self {
            IoError::Io { path, .. } | IoError::Format { path, .. } => path,
        }
    }
}

pub fn read_file(path: &Path) -> Result<Vec<u8>, IoError> {
    std::fs::read(path).map_err(|e| IoError::io(path, e))
}

pub fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IoError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|e| IoError::io(parent, e))?;
        }
    }
    std::fs::write(path, bytes).map_err(|e| IoError::io(path, e))
}
