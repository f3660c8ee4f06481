//! C interface to the `srdf` reconstruction library.
//!
//! Objects cross the boundary as opaque handles created by `srdf_*_new` /
//! `srdf_*_load` style functions and released with the matching
//! `srdf_*_free`. Every fallible call returns an [`SrdfStatus`]; on failure
//! [`srdf_last_error`] describes what went wrong on the calling thread.
//! Panics never unwind into C: they are reported as
//! [`SrdfStatus::Panic`].

use std::cell::RefCell;
use std::ffi::{c_char, c_void, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::ptr;
use std::sync::Arc;

use srdf::config::RunConfig;
use srdf::consistency::{ConsistencyParams, PhotoPrior, PriorContext, PriorRegistry};
use srdf::geometry::{DepthMap, MultiViewRig};
use srdf::pipeline::{self, ReconstructOutput, RunReport};

/// Result of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SrdfStatus {
    Ok = 0,
    /// A null pointer, invalid UTF-8 or a too-small buffer.
    InvalidArgument = 1,
    /// Bad configuration or input data.
    Validation = 2,
    /// Failure during computation.
    Runtime = 3,
    /// A bug inside the library; the handle involved should be discarded.
    Panic = 4,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_last_error(message: impl Into<String>) {
    let mut bytes = message.into().into_bytes();
    bytes.retain(|&b| b != 0);
    let text = CString::new(bytes).expect("nul bytes removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(text));
}

struct Failure(SrdfStatus, String);

impl From<srdf::Error> for Failure {
    fn from(e: srdf::Error) -> Self {
        let status = if e.is_validation() {
            SrdfStatus::Validation
        } else {
            SrdfStatus::Runtime
        };
        Failure(status, e.to_string())
    }
}

fn invalid(message: impl Into<String>) -> Failure {
    Failure(SrdfStatus::InvalidArgument, message.into())
}

/// Runs `f`, converting errors and panics into a status plus last error.
fn guard(f: impl FnOnce() -> Result<(), Failure>) -> SrdfStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            LAST_ERROR.with(|e| *e.borrow_mut() = None);
            SrdfStatus::Ok
        }
        Ok(Err(Failure(status, message))) => {
            set_last_error(message);
            status
        }
        Err(payload) => {
            let message = payload
                .downcast_ref::<&str>()
                .map(|s| s.to_string())
                .or_else(|| payload.downcast_ref::<String>().cloned())
                .unwrap_or_else(|| "unknown panic".into());
            set_last_error(format!("panic: {message}"));
            SrdfStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Failure> {
    if p.is_null() {
        return Err(invalid(format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| invalid(format!("{what} is not valid UTF-8")))
}

unsafe fn ref_arg<'a, T>(p: *const T, what: &str) -> Result<&'a T, Failure> {
    p.as_ref().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn mut_arg<'a, T>(p: *mut T, what: &str) -> Result<&'a mut T, Failure> {
    p.as_mut().ok_or_else(|| invalid(format!("{what} is null")))
}

unsafe fn store<T>(out: *mut *mut T, value: T) -> Result<(), Failure> {
    if out.is_null() {
        return Err(invalid("output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

/// Message of the last failed call on this thread, or null after a
/// successful call. Valid until the next call into the library on the same
/// thread.
#[no_mangle]
pub extern "C" fn srdf_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// Library version as a static NUL-terminated string.
#[no_mangle]
pub extern "C" fn srdf_version() -> *const c_char {
    concat!(env!("CARGO_PKG_VERSION"), "\0").as_ptr().cast()
}

// ---------------------------------------------------------------- config

/// Run configuration.
pub struct SrdfConfig(RunConfig);

/// Default configuration.
#[no_mangle]
pub extern "C" fn srdf_config_new() -> *mut SrdfConfig {
    Box::into_raw(Box::new(SrdfConfig(RunConfig::default())))
}

/// Reads a TOML configuration file. Relative paths inside it resolve against
/// the file's directory.
///
/// # Safety
/// `path` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_config_load(path: *const c_char, out: *mut *mut SrdfConfig) -> SrdfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        store(out, SrdfConfig(RunConfig::load(path.as_ref())?))
    })
}

/// Parses a TOML configuration from memory.
///
/// # Safety
/// `text` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_config_parse(text: *const c_char, out: *mut *mut SrdfConfig) -> SrdfStatus {
    guard(|| {
        let text = str_arg(text, "text")?;
        store(out, SrdfConfig(RunConfig::from_toml(text)?))
    })
}

/// # Safety
/// `config` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdf_config_free(config: *mut SrdfConfig) {
    free(config);
}

/// # Safety
/// `config` must be a live handle.
#[no_mangle]
pub unsafe extern "C" fn srdf_config_set_seed(config: *mut SrdfConfig, seed: u64) -> SrdfStatus {
    guard(|| {
        mut_arg(config, "config")?.0.seed = seed;
        Ok(())
    })
}

/// Sets `paths.scene`.
///
/// # Safety
/// `config` must be a live handle and `path` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn srdf_config_set_scene(config: *mut SrdfConfig, path: *const c_char) -> SrdfStatus {
    guard(|| {
        let path = str_arg(path, "path")?;
        mut_arg(config, "config")?.0.paths.scene = Some(PathBuf::from(path));
        Ok(())
    })
}

// ---------------------------------------------------------------- priors

/// Photo-consistency callback. `colors` holds `count` RGB triples and
/// `observed[k]` is nonzero when camera `k` of the group sees the sample
/// (unobserved triples are zero). Must return a score in
/// `(0, (1 + gamma_phi)^count]`. Called concurrently from worker threads.
pub type SrdfPriorFn = Option<
    unsafe extern "C" fn(
        user_data: *mut c_void,
        colors: *const f64,
        observed: *const u8,
        count: usize,
        sigma_c: f64,
        gamma_phi: f64,
    ) -> f64,
>;

/// Set of named photo-consistency priors. Starts with the built-in ones.
pub struct SrdfPriors(PriorRegistry);

struct CallbackPrior {
    name: String,
    callback: unsafe extern "C" fn(*mut c_void, *const f64, *const u8, usize, f64, f64) -> f64,
    user_data: *mut c_void,
}

// the registering caller promises a thread-safe callback
unsafe impl Send for CallbackPrior {}
unsafe impl Sync for CallbackPrior {}

impl PhotoPrior for CallbackPrior {
    fn name(&self) -> &str {
        &self.name
    }

    fn score(&self, ctx: &PriorContext<'_>, params: &ConsistencyParams) -> f64 {
        let n = ctx.observations.len();
        let mut colors = vec![0.0; 3 * n];
        let mut observed = vec![0u8; n];
        for (k, o) in ctx.observations.iter().enumerate() {
            if let Some(o) = o {
                colors[3 * k..3 * k + 3].copy_from_slice(&o.color);
                observed[k] = 1;
            }
        }
        unsafe {
            (self.callback)(
                self.user_data,
                colors.as_ptr(),
                observed.as_ptr(),
                n,
                params.sigma_c,
                params.gamma_phi,
            )
        }
    }
}

#[no_mangle]
pub extern "C" fn srdf_priors_new() -> *mut SrdfPriors {
    Box::into_raw(Box::new(SrdfPriors(PriorRegistry::with_builtins())))
}

/// # Safety
/// `priors` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdf_priors_free(priors: *mut SrdfPriors) {
    free(priors);
}

/// Registers `callback` under `name` (replacing any prior of that name).
/// Select it with `consistency.prior = "<name>"`. `user_data` is passed
/// through unchanged and must outlive every run using the prior.
///
/// # Safety
/// `priors` must be a live handle, `name` a NUL-terminated string and
/// `callback` safe to call from several threads at once.
#[no_mangle]
pub unsafe extern "C" fn srdf_priors_register(
    priors: *mut SrdfPriors,
    name: *const c_char,
    callback: SrdfPriorFn,
    user_data: *mut c_void,
) -> SrdfStatus {
    guard(|| {
        let priors = mut_arg(priors, "priors")?;
        let name = str_arg(name, "name")?;
        if name.is_empty() {
            return Err(invalid("prior name is empty"));
        }
        let callback = callback.ok_or_else(|| invalid("callback is null"))?;
        priors.0.register(Arc::new(CallbackPrior {
            name: name.to_string(),
            callback,
            user_data,
        }));
        Ok(())
    })
}

// ---------------------------------------------------------------- rigs

/// Calibrated views with images and silhouettes, plus ground-truth depth
/// when known.
pub struct SrdfRig {
    rig: MultiViewRig,
    truth: Option<MultiViewRig>,
}

/// Renders the scene named by `paths.scene` with the configured rig.
///
/// # Safety
/// `config` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_rig_synthesize(
    config: *const SrdfConfig,
    out: *mut *mut SrdfRig,
) -> SrdfStatus {
    guard(|| {
        let cfg = &ref_arg(config, "config")?.0;
        let truth = pipeline::synthesize(&pipeline::load_scene(cfg)?, cfg)?;
        let mut rig = truth.clone();
        for v in &mut rig.views {
            v.depth = DepthMap::empty(v.width(), v.height());
        }
        store(
            out,
            SrdfRig {
                rig,
                truth: Some(truth),
            },
        )
    })
}

/// Reads a dataset directory written by `srdf synth`.
///
/// # Safety
/// `dir` must be a NUL-terminated string; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_rig_read_dataset(dir: *const c_char, out: *mut *mut SrdfRig) -> SrdfStatus {
    guard(|| {
        let dir = str_arg(dir, "dir")?;
        let ds = srdf::dataset::read_dataset(dir.as_ref())?;
        store(
            out,
            SrdfRig {
                rig: ds.rig,
                truth: ds.truth,
            },
        )
    })
}

/// # Safety
/// `rig` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdf_rig_free(rig: *mut SrdfRig) {
    free(rig);
}

/// Number of cameras, or 0 for a null handle.
///
/// # Safety
/// `rig` must be null or a live handle.
#[no_mangle]
pub unsafe extern "C" fn srdf_rig_camera_count(rig: *const SrdfRig) -> usize {
    rig.as_ref().map_or(0, |r| r.rig.len())
}

// ---------------------------------------------------------------- reconstruction

/// Optimized depth maps and fused mesh.
pub struct SrdfReconstruction {
    output: ReconstructOutput,
    report: RunReport,
}

/// Scalar summary of a reconstruction. Error fields are NaN when the rig has
/// no ground truth.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrdfSummary {
    pub cameras: usize,
    pub vertices: usize,
    pub triangles: usize,
    pub watertight: bool,
    pub initial_mae: f64,
    pub final_mae: f64,
}

/// Initializes, optimizes and fuses `rig` (left unchanged). `priors` may be
/// null to use only the built-in priors.
///
/// # Safety
/// `config` and `rig` must be live handles, `priors` null or live, `out`
/// writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_reconstruct(
    config: *const SrdfConfig,
    priors: *const SrdfPriors,
    rig: *const SrdfRig,
    out: *mut *mut SrdfReconstruction,
) -> SrdfStatus {
    guard(|| {
        let cfg = &ref_arg(config, "config")?.0;
        let input = ref_arg(rig, "rig")?;
        let builtins;
        let priors = match priors.as_ref() {
            Some(p) => &p.0,
            None => {
                builtins = PriorRegistry::with_builtins();
                &builtins
            }
        };
        cfg.validate_params(priors)?;
        let output = pipeline::reconstruct(input.rig.clone(), cfg, priors)?;
        let report = RunReport::new(&output, input.truth.as_ref())?;
        store(out, SrdfReconstruction { output, report })
    })
}

/// # Safety
/// `rec` must come from this library and not be used afterwards.
#[no_mangle]
pub unsafe extern "C" fn srdf_reconstruction_free(rec: *mut SrdfReconstruction) {
    free(rec);
}

/// # Safety
/// `rec` must be a live handle; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_reconstruction_summary(
    rec: *const SrdfReconstruction,
    out: *mut SrdfSummary,
) -> SrdfStatus {
    guard(|| {
        let r = &ref_arg(rec, "reconstruction")?.report;
        let out = mut_arg(out, "out")?;
        let mae = |e: &Option<srdf::metrics::DepthErrorReport>| e.as_ref().map_or(f64::NAN, |e| e.mae);
        *out = SrdfSummary {
            cameras: r.cameras,
            vertices: r.mesh_vertices,
            triangles: r.mesh_triangles,
            watertight: r.mesh_watertight,
            initial_mae: mae(&r.initial_depth_error),
            final_mae: mae(&r.final_depth_error),
        };
        Ok(())
    })
}

/// Copies the mesh vertices as `x y z` triples into `xyz`, which must hold
/// `3 * vertices` doubles.
///
/// # Safety
/// `rec` must be a live handle and `xyz` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn srdf_reconstruction_vertices(
    rec: *const SrdfReconstruction,
    xyz: *mut f64,
    len: usize,
) -> SrdfStatus {
    guard(|| {
        let mesh = &ref_arg(rec, "reconstruction")?.output.fusion.mesh;
        let need = 3 * mesh.vertices.len();
        if xyz.is_null() || len < need {
            return Err(invalid(format!("vertex buffer needs {need} doubles, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(xyz, need);
        for (d, v) in dst.chunks_exact_mut(3).zip(&mesh.vertices) {
            d.copy_from_slice(&[v.x, v.y, v.z]);
        }
        Ok(())
    })
}

/// Copies the triangle vertex indices into `indices`, which must hold
/// `3 * triangles` entries.
///
/// # Safety
/// `rec` must be a live handle and `indices` valid for `len` writes.
#[no_mangle]
pub unsafe extern "C" fn srdf_reconstruction_triangles(
    rec: *const SrdfReconstruction,
    indices: *mut u32,
    len: usize,
) -> SrdfStatus {
    guard(|| {
        let mesh = &ref_arg(rec, "reconstruction")?.output.fusion.mesh;
        let need = 3 * mesh.triangles.len();
        if indices.is_null() || len < need {
            return Err(invalid(format!("index buffer needs {need} entries, got {len}")));
        }
        let dst = std::slice::from_raw_parts_mut(indices, need);
        for (d, t) in dst.chunks_exact_mut(3).zip(&mesh.triangles) {
            d.copy_from_slice(t);
        }
        Ok(())
    })
}

/// Writes depth maps, meshes, energy log, report and manifest to `dir`.
///
/// # Safety
/// `rec` must be a live handle and `dir` a NUL-terminated string.
#[no_mangle]
pub unsafe extern "C" fn srdf_reconstruction_write(
    rec: *const SrdfReconstruction,
    dir: *const c_char,
) -> SrdfStatus {
    guard(|| {
        let rec = ref_arg(rec, "reconstruction")?;
        let dir = str_arg(dir, "dir")?;
        pipeline::write_reconstruct_output(dir.as_ref(), &rec.output, &rec.report)?;
        Ok(())
    })
}

// ---------------------------------------------------------------- metrics

/// Surface comparison in world units.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SrdfMetrics {
    pub accuracy: f64,
    pub completeness: f64,
    pub chamfer: f64,
}

/// Compares two mesh files (PLY or OBJ) with the configured sampling.
///
/// # Safety
/// `config` must be a live handle, the paths NUL-terminated strings and
/// `out` writable.
#[no_mangle]
pub unsafe extern "C" fn srdf_evaluate(
    config: *const SrdfConfig,
    mesh: *const c_char,
    gt: *const c_char,
    out: *mut SrdfMetrics,
) -> SrdfStatus {
    guard(|| {
        let cfg = &ref_arg(config, "config")?.0;
        let mesh = str_arg(mesh, "mesh")?;
        let gt = str_arg(gt, "gt")?;
        let out = mut_arg(out, "out")?;
        let r = pipeline::evaluate(mesh.as_ref(), gt.as_ref(), cfg)?;
        *out = SrdfMetrics {
            accuracy: r.accuracy,
            completeness: r.completeness,
            chamfer: r.chamfer,
        };
        Ok(())
    })
}
