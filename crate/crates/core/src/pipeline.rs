//! End-to-end steps shared by the command line and the C interface.

use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{InitMode, RunConfig};
use crate::consistency::{PhotoPrior, PriorRegistry};
use crate::dataset::{self, read_depth_dir, view_name};
use crate::error::{Error, Result};
use crate::fusion::{fuse, FusionOutput};
use crate::geometry::MultiViewRig;
use crate::io::{self, IoError};
use crate::metrics::{depth_error, evaluate_meshes, DepthErrorReport, MetricsReport};
use crate::optimize::{make_groups, optimize, OptimizeReport};
use crate::synth::{import_depth_maps, render, visual_hull_init, HullReport, Scene, SceneDescription};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const GT_MESH_FILE: &str = "gt_mesh.ply";
pub const MESH_FILE: &str = "mesh.ply";
pub const MESH_OBJ_FILE: &str = "mesh.obj";
pub const ENERGY_FILE: &str = "energy.csv";
pub const TIMING_FILE: &str = "timing.csv";
pub const REPORT_FILE: &str = "report.json";
pub const METRICS_JSON_FILE: &str = "metrics.json";
pub const METRICS_CSV_FILE: &str = "metrics.csv";

/// Sphere stacks used when tessellating analytic shapes for evaluation.
const GT_MESH_DETAIL: usize = 96;

/// Loads and builds the scene named in `paths.scene`.
pub fn load_scene(cfg: &RunConfig) -> Result<Scene> {
    let path = cfg
        .paths
        .scene
        .as_deref()
        .ok_or_else(|| Error::Config("paths.scene not set".into()))?;
    let desc = SceneDescription::load(path)?;
    Ok(Scene::build(&desc, path.parent().unwrap_or(Path::new("")))?)
}

/// Renders the configured rig around the scene center.
pub fn synthesize(scene: &Scene, cfg: &RunConfig) -> Result<MultiViewRig> {
    let cameras = cfg.rig.cameras(scene.bounds.center())?;
    Ok(render(scene, cameras, cfg.seed)?)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

/// Checksums of `files` (relative to `dir`), sorted by path, written to
/// `manifest.json`.
pub fn write_manifest(dir: &Path, files: &[PathBuf]) -> Result<Vec<ManifestEntry>> {
    let mut entries = files
        .iter()
        .map(|rel| {
            let bytes = io::read_file(&dir.join(rel))?;
            Ok(ManifestEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256: hex::encode(Sha256::digest(&bytes)),
                bytes: bytes.len() as u64,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    #[derive(Serialize)]
    struct Manifest<'a> {
        files: &'a [ManifestEntry],
    }
    let mut json = serde_json::to_vec_pretty(&Manifest { files: &entries }).expect("manifest serializes");
    json.push(b'\n');
    io::write_file(&dir.join(MANIFEST_FILE), &json)?;
    Ok(entries)
}

/// Writes a rendered dataset (with ground-truth depth and surface mesh) and
/// its manifest.
pub fn write_synth_output(out: &Path, scene: &Scene, rig: &MultiViewRig) -> Result<Vec<ManifestEntry>> {
    let mut files = dataset::write_dataset(out, rig, true)?;
    io::write_ply(&out.join(GT_MESH_FILE), &scene.surface_mesh(GT_MESH_DETAIL))?;
    files.push(PathBuf::from(GT_MESH_FILE));
    write_manifest(out, &files)
}

/// Input of a reconstruction: calibrated images and silhouettes, plus
/// ground-truth depth when known.
#[derive(Debug, Clone)]
pub struct ReconstructInput {
    pub rig: MultiViewRig,
    pub truth: Option<MultiViewRig>,
}

/// Reads `paths.dataset`, or renders `paths.scene` when no dataset is set.
pub fn load_input(cfg: &RunConfig) -> Result<ReconstructInput> {
    if let Some(dir) = &cfg.paths.dataset {
        let ds = dataset::read_dataset(dir)?;
        return Ok(ReconstructInput {
            rig: ds.rig,
            truth: ds.truth,
        });
    }
    let scene = load_scene(cfg)?;
    let truth = synthesize(&scene, cfg)?;
    let mut rig = truth.clone();
    for v in &mut rig.views {
        v.depth = crate::geometry::DepthMap::empty(v.width(), v.height());
    }
    Ok(ReconstructInput {
        rig,
        truth: Some(truth),
    })
}

/// Fills every view's depth map according to `init.mode`.
pub fn initialize(rig: &mut MultiViewRig, cfg: &RunConfig) -> Result<Option<HullReport>> {
    match cfg.init.mode {
        InitMode::VisualHull => Ok(Some(visual_hull_init(rig, &cfg.init.hull())?)),
        InitMode::Import => {
            let dir = cfg
                .init
                .depth_dir
                .as_deref()
                .ok_or_else(|| Error::Config("init.depth_dir not set".into()))?;
            let grids = read_depth_dir(dir, rig.len())?;
            import_depth_maps(rig, &grids, cfg.init.depth_convention)?;
            Ok(None)
        }
    }
}

#[derive(Debug, Clone)]
pub struct ReconstructOutput {
    /// Initial depth maps.
    pub initial: MultiViewRig,
    /// Optimized depth maps.
    pub rig: MultiViewRig,
    pub hull: Option<HullReport>,
    pub optimize: OptimizeReport,
    pub fusion: FusionOutput,
}

/// Looks up the configured prior in `priors`.
pub fn resolve_prior(cfg: &RunConfig, priors: &PriorRegistry) -> Result<Arc<dyn PhotoPrior>> {
    Ok(priors.get(&cfg.consistency.prior)?)
}

/// init -> optimize -> bilateral -> TSDF -> marching cubes -> clean.
pub fn reconstruct(
    mut rig: MultiViewRig,
    cfg: &RunConfig,
    priors: &PriorRegistry,
) -> Result<ReconstructOutput> {
    rig.require_multi_view()?;
    let prior = resolve_prior(cfg, priors)?;
    let hull = initialize(&mut rig, cfg)?;
    let initial = rig.clone();
    let schedule = cfg.schedule.schedule(rig.diameter());
    let params = cfg.consistency.params(schedule.sigma_d(0));
    let groups = make_groups(&rig, cfg.schedule.group_size)?;
    let report = optimize(
        &mut rig,
        &groups,
        &schedule,
        &params,
        prior.as_ref(),
        &cfg.optimizer,
    )?;
    let fusion = fuse(&rig, &cfg.fusion);
    if fusion.mesh.is_empty() {
        log::warn!("fusion produced an empty mesh");
    }
    Ok(ReconstructOutput {
        initial,
        rig,
        hull,
        optimize: report,
        fusion,
    })
}

/// Summary written next to a reconstruction.
#[derive(Debug, Clone, Serialize)]
pub struct RunReport {
    pub cameras: usize,
    pub hull_surviving_voxels: Option<usize>,
    pub hull_fallback_pixels: Option<usize>,
    pub clamped_rays: usize,
    pub dropped_samples: usize,
    pub clamped_depths: usize,
    pub mesh_vertices: usize,
    pub mesh_triangles: usize,
    pub mesh_watertight: bool,
    pub cleaned_vertices: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_depth_error: Option<DepthErrorReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub final_depth_error: Option<DepthErrorReport>,
}

impl RunReport {
    pub fn new(out: &ReconstructOutput, truth: Option<&MultiViewRig>) -> Result<Self> {
        let (initial_depth_error, final_depth_error) = match truth {
            Some(t) => (
                Some(depth_error(&out.initial, t)?),
                Some(depth_error(&out.rig, t)?),
            ),
            None => (None, None),
        };
        Ok(Self {
            cameras: out.rig.len(),
            hull_surviving_voxels: out.hull.map(|h| h.surviving_voxels),
            hull_fallback_pixels: out.hull.map(|h| h.fallback_pixels),
            clamped_rays: out.optimize.clamped_rays,
            dropped_samples: out.optimize.dropped_samples,
            clamped_depths: out.optimize.clamped_depths,
            mesh_vertices: out.fusion.mesh.vertices.len(),
            mesh_triangles: out.fusion.mesh.triangles.len(),
            mesh_watertight: out.fusion.mesh.is_watertight(),
            cleaned_vertices: out.fusion.clean.removed_vertices,
            initial_depth_error,
            final_depth_error,
        })
    }
}

/// Writes optimized depth maps, meshes, the energy log and the run report.
/// Wall-clock timings go to `timing.csv`, which the manifest leaves out so
/// that reruns produce identical checksums.
pub fn write_reconstruct_output(
    out_dir: &Path,
    out: &ReconstructOutput,
    report: &RunReport,
) -> Result<Vec<ManifestEntry>> {
    let mut files = Vec::new();
    for (j, view) in out.rig.views.iter().enumerate() {
        let rel = Path::new("depth").join(format!("{}.pfm", view_name(j)));
        io::write_depth_pfm(&out_dir.join(&rel), &view.depth)?;
        files.push(rel);
    }
    io::write_ply(&out_dir.join(MESH_FILE), &out.fusion.mesh)?;
    files.push(PathBuf::from(MESH_FILE));
    io::write_obj(&out_dir.join(MESH_OBJ_FILE), &out.fusion.mesh)?;
    files.push(PathBuf::from(MESH_OBJ_FILE));
    io::write_file(
        &out_dir.join(ENERGY_FILE),
        out.optimize.log.to_csv(false).as_bytes(),
    )?;
    files.push(PathBuf::from(ENERGY_FILE));
    io::write_file(
        &out_dir.join(TIMING_FILE),
        out.optimize.log.to_csv(true).as_bytes(),
    )?;
    let mut json = serde_json::to_vec_pretty(report).expect("report serializes");
    json.push(b'\n');
    io::write_file(&out_dir.join(REPORT_FILE), &json)?;
    files.push(PathBuf::from(REPORT_FILE));
    write_manifest(out_dir, &files)
}

/// Compares two meshes on disk.
pub fn evaluate(mesh: &Path, gt: &Path, cfg: &RunConfig) -> Result<MetricsReport> {
    let recon = io::read_mesh(mesh)?;
    let truth = io::read_mesh(gt)?;
    if recon.is_empty() {
        return Err(IoError::format(mesh, "mesh has no triangles").into());
    }
    if truth.is_empty() {
        return Err(IoError::format(gt, "mesh has no triangles").into());
    }
    Ok(evaluate_meshes(&recon, &truth, &cfg.metrics)?)
}

/// Writes `metrics.json` and `metrics.csv`.
pub fn write_metrics(out_dir: &Path, report: &MetricsReport) -> Result<Vec<ManifestEntry>> {
    io::write_file(&out_dir.join(METRICS_JSON_FILE), report.to_json().as_bytes())?;
    io::write_file(&out_dir.join(METRICS_CSV_FILE), report.to_csv().as_bytes())?;
    write_manifest(
        out_dir,
        &[PathBuf::from(METRICS_JSON_FILE), PathBuf::from(METRICS_CSV_FILE)],
    )
}
