//! Run configuration: one TOML file describing every step of a run.
//!
//! Every section and field is optional; missing values take the defaults
//! shown by `srdf <command> --dry-run`.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::consistency::{ConsistencyParams, MedianMode, PriorRegistry, MEDIAN_BASELINE};
use crate::error::{Error, Result};
use crate::fusion::FusionParams;
use crate::geometry::Aabb;
use crate::metrics::MetricsParams;
use crate::optimize::{OptimizerConfig, SamplingSchedule, SigmaDRule};
use crate::synth::{DepthConvention, HullParams, RigLayout};

/// Fraction of the scene diameter used when `offset_init = "auto"`.
pub const AUTO_OFFSET_FRACTION: f64 = 0.04;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    /// Scene description (TOML) rendered by `synth`, or by `reconstruct`
    /// when no dataset is given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scene: Option<PathBuf>,
    /// Dataset directory read by `reconstruct`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Output directory.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    /// Reconstructed mesh read by `eval`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mesh: Option<PathBuf>,
    /// Ground-truth mesh read by `eval`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub gt_mesh: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConsistencyConfig {
    /// Name of a registered photo-consistency prior.
    pub prior: String,
    pub sigma_c: f64,
    pub gamma_srdf: f64,
    pub gamma_phi: f64,
    pub median: MedianMode,
}

impl Default for ConsistencyConfig {
    fn default() -> Self {
        let p = ConsistencyParams::default();
        Self {
            prior: MEDIAN_BASELINE.to_string(),
            sigma_c: p.sigma_c,
            gamma_srdf: p.gamma_srdf,
            gamma_phi: p.gamma_phi,
            median: p.median,
        }
    }
}

impl ConsistencyConfig {
    /// Parameters for the first stage; `sigma_d` is set per stage by the
    /// optimizer from the schedule.
    pub fn params(&self, sigma_d: f64) -> ConsistencyParams {
        ConsistencyParams {
            sigma_d,
            sigma_c: self.sigma_c,
            gamma_srdf: self.gamma_srdf,
            gamma_phi: self.gamma_phi,
            median: self.median,
        }
    }
}

/// Initial sampling offset: a fixed world distance or a fraction of the
/// scene diameter chosen automatically.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum OffsetSetting {
    #[default]
    Auto,
    Fixed(f64),
}

impl OffsetSetting {
    pub fn resolve(&self, diameter: f64) -> f64 {
        match *self {
            OffsetSetting::Auto => AUTO_OFFSET_FRACTION * diameter,
            OffsetSetting::Fixed(v) => v,
        }
    }
}

impl fmt::Display for OffsetSetting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OffsetSetting::Auto => f.write_str("auto"),
            OffsetSetting::Fixed(v) => write!(f, "{v}"),
        }
    }
}

impl Serialize for OffsetSetting {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        match *self {
            OffsetSetting::Auto => s.serialize_str("auto"),
            OffsetSetting::Fixed(v) => s.serialize_f64(v),
        }
    }
}

impl<'de> Deserialize<'de> for OffsetSetting {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Number(f64),
            Integer(i64),
            Text(String),
        }
        match Raw::deserialize(d)? {
            Raw::Number(v) => Ok(OffsetSetting::Fixed(v)),
            Raw::Integer(v) => Ok(OffsetSetting::Fixed(v as f64)),
            Raw::Text(t) if t == "auto" => Ok(OffsetSetting::Auto),
            Raw::Text(t) => Err(serde::de::Error::custom(format!(
                "offset_init must be a number or \"auto\", got \"{t}\""
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub offset_init: OffsetSetting,
    pub offset_decay: f64,
    pub stages: usize,
    pub epochs_per_stage: usize,
    pub samples_per_ray: usize,
    /// `"offset/K"` or `"fixed:V"`.
    pub sigma_d: SigmaDRule,
    /// Cameras per optimization group.
    pub group_size: usize,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        let s = SamplingSchedule::with_offset(1.0);
        Self {
            offset_init: OffsetSetting::Auto,
            offset_decay: s.offset_decay,
            stages: s.stages,
            epochs_per_stage: s.epochs_per_stage,
            samples_per_ray: s.samples_per_ray,
            sigma_d: s.sigma_d_rule,
            group_size: 4,
        }
    }
}

impl ScheduleConfig {
    pub fn schedule(&self, diameter: f64) -> SamplingSchedule {
        SamplingSchedule {
            offset_init: self.offset_init.resolve(diameter),
            offset_decay: self.offset_decay,
            stages: self.stages,
            epochs_per_stage: self.epochs_per_stage,
            samples_per_ray: self.samples_per_ray,
            sigma_d_rule: self.sigma_d,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitMode {
    #[default]
    VisualHull,
    Import,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InitConfig {
    pub mode: InitMode,
    /// Visual-hull voxels per axis.
    pub resolution: usize,
    /// Dilate the carving test by the projected voxel size.
    pub conservative: bool,
    /// Directory of `view_NNN.pfm` depth maps for `mode = "import"`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub depth_dir: Option<PathBuf>,
    pub depth_convention: DepthConvention,
}

impl Default for InitConfig {
    fn default() -> Self {
        let h = HullParams::default();
        Self {
            mode: InitMode::VisualHull,
            resolution: h.resolution,
            conservative: h.conservative,
            depth_dir: None,
            depth_convention: DepthConvention::RayDistance,
        }
    }
}

impl InitConfig {
    pub fn hull(&self) -> HullParams {
        HullParams {
            resolution: self.resolution,
            conservative: self.conservative,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed for image noise and mesh sampling.
    pub seed: u64,
    /// Worker threads; 0 uses every core.
    pub threads: usize,
    pub paths: PathsConfig,
    pub rig: RigLayout,
    pub init: InitConfig,
    pub consistency: ConsistencyConfig,
    pub schedule: ScheduleConfig,
    pub optimizer: OptimizerConfig,
    pub fusion: FusionParams,
    pub metrics: MetricsParams,
}

/// Which paths a command needs to exist.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Synth,
    Reconstruct,
    Eval,
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads a config file. Relative paths inside it are resolved against
    /// the file's directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text =
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let mut cfg: Self =
            toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        let base = path.parent().unwrap_or(Path::new(""));
        cfg.resolve_paths(base);
        Ok(cfg)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut Option<PathBuf>| {
            if let Some(path) = p {
                if path.is_relative() {
                    *path = base.join(&*path);
                }
            }
        };
        fix(&mut self.paths.scene);
        fix(&mut self.paths.dataset);
        fix(&mut self.paths.out);
        fix(&mut self.paths.mesh);
        fix(&mut self.paths.gt_mesh);
        fix(&mut self.init.depth_dir);
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config serializes")
    }

    /// Checks every parameter block and that the inputs `command` reads exist.
    pub fn validate(&self, command: Command) -> Result<()> {
        self.validate_with(command, &PriorRegistry::with_builtins())
    }

    /// [`validate`](Self::validate), resolving the prior name in `priors`.
    pub fn validate_with(&self, command: Command, priors: &PriorRegistry) -> Result<()> {
        self.validate_params(priors)?;
        self.validate_inputs(command)
    }

    /// Checks the parameter blocks only, not the input paths.
    pub fn validate_params(&self, priors: &PriorRegistry) -> Result<()> {
        let cfg = |m: String| Error::Config(m);
        self.rig_validate()?;
        self.init_validate()?;
        self.consistency
            .params(1.0)
            .validate()
            .map_err(|e| cfg(e.to_string()))?;
        priors
            .get(&self.consistency.prior)
            .map_err(|e| cfg(e.to_string()))?;
        let schedule = self.schedule.schedule(1.0);
        if let OffsetSetting::Fixed(v) = self.schedule.offset_init {
            if !(v > 0.0 && v.is_finite()) {
                return Err(cfg(format!("schedule.offset_init must be > 0, got {v}")));
            }
        }
        schedule.validate().map_err(|e| cfg(e.to_string()))?;
        if self.schedule.group_size < 2 {
            return Err(cfg(format!(
                "schedule.group_size must be >= 2, got {}",
                self.schedule.group_size
            )));
        }
        self.optimizer.validate().map_err(|e| cfg(e.to_string()))?;
        self.fusion.validate().map_err(cfg)?;
        self.metrics.validate().map_err(cfg)?;
        Ok(())
    }

    fn validate_inputs(&self, command: Command) -> Result<()> {
        let cfg = |m: String| Error::Config(m);
        let exists = |what: &str, p: &Option<PathBuf>| -> Result<()> {
            match p {
                Some(p) if p.exists() => Ok(()),
                Some(p) => Err(cfg(format!("{what} not found: {}", p.display()))),
                None => Err(cfg(format!("{what} not set"))),
            }
        };
        match command {
            Command::Synth => exists("paths.scene", &self.paths.scene)?,
            Command::Reconstruct => {
                if self.paths.dataset.is_some() {
                    exists("paths.dataset", &self.paths.dataset)?;
                } else {
                    exists("paths.scene (or paths.dataset)", &self.paths.scene)?;
                }
                if self.init.mode == InitMode::Import {
                    exists("init.depth_dir", &self.init.depth_dir)?;
                }
            }
            Command::Eval => {
                exists("mesh", &self.paths.mesh)?;
                exists("ground-truth mesh", &self.paths.gt_mesh)?;
            }
        }
        Ok(())
    }

    fn rig_validate(&self) -> Result<()> {
        let r = &self.rig;
        if r.count == 0 || r.width == 0 || r.height == 0 {
            return Err(Error::Config("rig count, width and height must be >= 1".into()));
        }
        if !(r.distance > 0.0 && r.fov_deg > 0.0 && r.fov_deg < 180.0) {
            return Err(Error::Config(
                "rig distance must be > 0 and fov_deg in (0, 180)".into(),
            ));
        }
        Ok(())
    }

    fn init_validate(&self) -> Result<()> {
        if self.init.mode == InitMode::VisualHull && self.init.resolution < 2 {
            return Err(Error::Config(format!(
                "init.resolution must be >= 2, got {}",
                self.init.resolution
            )));
        }
        Ok(())
    }

    /// The resolved parameter table: the full config as TOML, followed by
    /// derived values as comments (so the text still parses as a config).
    pub fn resolved_table(&self, bounds: Option<&Aabb>) -> String {
        let mut out = self.to_toml();
        if let Some(b) = bounds {
            let d = b.diameter();
            let s = self.schedule.schedule(d);
            out.push_str(&format!("\n# scene diameter: {d}\n"));
            for stage in 0..s.stages {
                out.push_str(&format!(
                    "# stage {stage}: offset {} sigma_d {} sample spacing {}\n",
                    s.offset(stage),
                    s.sigma_d(stage),
                    s.sample_spacing(stage)
                ));
            }
            out.push_str(&format!(
                "# fusion voxel size: {}\n",
                b.padded(self.fusion.padding).extent().max() / self.fusion.resolution as f64
            ));
        }
        out
    }
}
