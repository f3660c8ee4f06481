//! On-disk layout of a multi-view dataset.
//!
//! ```text
//! dataset.toml          scene bounds and image size
//! cameras.txt           one camera per line (see `io::read_cameras`)
//! images/view_NNN.png   RGB images
//! masks/view_NNN.png    silhouettes
//! depth/view_NNN.pfm    ray-distance depth maps (optional)
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Aabb, CameraView, DepthMap, MultiViewRig};
use crate::io::{self, CameraRecord, FloatGrid, IoError};
use crate::synth::{import_depth_maps, DepthConvention};

pub const INFO_FILE: &str = "dataset.toml";
pub const CAMERAS_FILE: &str = "cameras.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetInfo {
    pub bounds: Aabb,
    pub cameras: usize,
    pub width: usize,
    pub height: usize,
}

pub fn view_name(camera: usize) -> String {
    format!("view_{camera:03}")
}

pub fn image_path(camera: usize) -> PathBuf {
    Path::new("images").join(format!("{}.png", view_name(camera)))
}

pub fn mask_path(camera: usize) -> PathBuf {
    Path::new("masks").join(format!("{}.png", view_name(camera)))
}

pub fn depth_path(camera: usize) -> PathBuf {
    Path::new("depth").join(format!("{}.pfm", view_name(camera)))
}

/// Writes images, masks, cameras and bounds, plus depth maps when
/// `with_depth` is set. Returns the written paths relative to `dir`.
pub fn write_dataset(dir: &Path, rig: &MultiViewRig, with_depth: bool) -> Result<Vec<PathBuf>> {
    let first = &rig.views[0];
    let info = DatasetInfo {
        bounds: rig.bounds,
        cameras: rig.len(),
        width: first.width(),
        height: first.height(),
    };
    if rig
        .views
        .iter()
        .any(|v| v.width() != info.width || v.height() != info.height)
    {
        return Err(Error::Config(
            "all views of a dataset must share one image size".into(),
        ));
    }
    let mut written = Vec::new();
    let text = toml::to_string(&info).expect("dataset info serializes");
    io::write_file(&dir.join(INFO_FILE), text.as_bytes())?;
    written.push(PathBuf::from(INFO_FILE));
    let records: Vec<CameraRecord> = rig
        .views
        .iter()
        .map(|v| CameraRecord::from_camera(&v.camera))
        .collect();
    io::write_cameras(&dir.join(CAMERAS_FILE), &records)?;
    written.push(PathBuf::from(CAMERAS_FILE));
    for (j, view) in rig.views.iter().enumerate() {
        io::write_rgb_png(&dir.join(image_path(j)), &view.image)?;
        io::write_mask_png(&dir.join(mask_path(j)), &view.mask)?;
        written.push(image_path(j));
        written.push(mask_path(j));
        if with_depth {
            io::write_depth_pfm(&dir.join(depth_path(j)), &view.depth)?;
            written.push(depth_path(j));
        }
    }
    Ok(written)
}

/// A dataset read from disk. The rig's depth maps are empty; ground-truth
/// depths, when present, are returned separately.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub rig: MultiViewRig,
    pub truth: Option<MultiViewRig>,
}

/// Reads only the dataset header.
pub fn read_dataset_info(dir: &Path) -> Result<DatasetInfo> {
    let info_path = dir.join(INFO_FILE);
    let text = std::fs::read_to_string(&info_path).map_err(|e| IoError::io(&info_path, e))?;
    Ok(toml::from_str(&text).map_err(|e| IoError::format(&info_path, e.to_string()))?)
}

pub fn read_dataset(dir: &Path) -> Result<Dataset> {
    let info = read_dataset_info(dir)?;
    let cameras_path = dir.join(CAMERAS_FILE);
    let records = io::read_cameras(&cameras_path)?;
    if records.len() != info.cameras {
        return Err(IoError::format(
            &cameras_path,
            format!(
                "{} cameras listed, {INFO_FILE} declares {}",
                records.len(),
                info.cameras
            ),
        )
        .into());
    }
    let mut views = Vec::with_capacity(records.len());
    for (j, record) in records.iter().enumerate() {
        let image = io::read_rgb_png(&dir.join(image_path(j)))?;
        let mask = io::read_mask_png(&dir.join(mask_path(j)))?;
        let camera = record.to_camera(image.width(), image.height())?;
        views.push(CameraView {
            depth: DepthMap::empty(image.width(), image.height()),
            camera,
            image,
            mask,
        });
    }
    let rig = MultiViewRig::new(views, info.bounds)?;
    let has_depth = (0..rig.len())
        .map(|j| dir.join(depth_path(j)))
        .collect::<Vec<_>>();
    let truth = if has_depth.iter().all(|p| p.exists()) {
        let grids = has_depth
            .iter()
            .map(|p| io::read_depth_grid(p))
            .collect::<std::result::Result<Vec<FloatGrid>, _>>()?;
        let mut truth = rig.clone();
        import_depth_maps(&mut truth, &grids, DepthConvention::RayDistance)?;
        Some(truth)
    } else {
        None
    };
    Ok(Dataset { rig, truth })
}

/// Reads `view_NNN.pfm` (or `.raw`) for every camera from `dir`.
pub fn read_depth_dir(dir: &Path, cameras: usize) -> Result<Vec<FloatGrid>> {
    (0..cameras)
        .map(|j| {
            let pfm = dir.join(format!("{}.pfm", view_name(j)));
            let raw = dir.join(format!("{}.raw", view_name(j)));
            let path = if !pfm.exists() && raw.exists() { raw } else { pfm };
            Ok(io::read_depth_grid(&path)?)
        })
        .collect()
}
