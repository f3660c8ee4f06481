use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};

use srdf::config::{Command, RunConfig};
use srdf::consistency::PriorRegistry;
use srdf::dataset::read_dataset_info;
use srdf::geometry::Aabb;
use srdf::pipeline;
use srdf::synth::SceneDescription;
use srdf::{Error, Result};

/// Multi-view surface reconstruction from calibrated images and silhouettes.
#[derive(Debug, Parser)]
#[command(name = "srdf", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Debug, Subcommand)]
enum Cmd {
    /// Render a synthetic scene: images, masks, ground-truth depth and mesh.
    Synth {
        #[command(flatten)]
        common: Common,
        /// Scene description (overrides `paths.scene`).
        #[arg(long)]
        scene: Option<PathBuf>,
    },
    /// Initialize, optimize and fuse depth maps into a mesh.
    Reconstruct {
        #[command(flatten)]
        common: Common,
        /// Scene description to render as input (overrides `paths.scene`).
        #[arg(long)]
        scene: Option<PathBuf>,
        /// Dataset directory written by `synth` (overrides `paths.dataset`).
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Compare a reconstructed mesh with a ground-truth mesh.
    Eval {
        #[command(flatten)]
        common: Common,
        /// Reconstructed mesh (overrides `paths.mesh`).
        #[arg(long)]
        mesh: Option<PathBuf>,
        /// Ground-truth mesh (overrides `paths.gt_mesh`).
        #[arg(long)]
        gt: Option<PathBuf>,
    },
}

#[derive(Debug, Args)]
struct Common {
    /// Run configuration (TOML). Defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory (overrides `paths.out`).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; 0 uses all cores.
    #[arg(long)]
    threads: Option<usize>,
    /// Validate the configuration and print the resolved parameters.
    #[arg(long)]
    dry_run: bool,
}

impl Common {
    fn load(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(out) = &self.out {
            cfg.paths.out = Some(out.clone());
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(threads) = self.threads {
            cfg.threads = threads;
        }
        Ok(cfg)
    }
}

fn override_path(slot: &mut Option<PathBuf>, value: &Option<PathBuf>) {
    if value.is_some() {
        slot.clone_from(value);
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let (command, common, cfg) = match &cli.command {
        Cmd::Synth { common, scene } => {
            let mut cfg = common.load()?;
            override_path(&mut cfg.paths.scene, scene);
            (Command::Synth, common, cfg)
        }
        Cmd::Reconstruct {
            common,
            scene,
            dataset,
        } => {
            let mut cfg = common.load()?;
            override_path(&mut cfg.paths.scene, scene);
            override_path(&mut cfg.paths.dataset, dataset);
            (Command::Reconstruct, common, cfg)
        }
        Cmd::Eval { common, mesh, gt } => {
            let mut cfg = common.load()?;
            override_path(&mut cfg.paths.mesh, mesh);
            override_path(&mut cfg.paths.gt_mesh, gt);
            (Command::Eval, common, cfg)
        }
    };
    cfg.validate(command)?;
    if common.dry_run {
        print!("{}", cfg.resolved_table(input_bounds(&cfg, command)?.as_ref()));
        return Ok(());
    }
    let out = cfg
        .paths
        .out
        .clone()
        .ok_or_else(|| Error::Config("no output directory (set paths.out or pass --out)".into()))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let start = Instant::now();
    match command {
        Command::Synth => synth(&cfg, &out)?,
        Command::Reconstruct => reconstruct(&cfg, &out)?,
        Command::Eval => eval(&cfg, &out)?,
    }
    log::info!(
        "done in {:.1} s, outputs in {}",
        start.elapsed().as_secs_f64(),
        out.display()
    );
    Ok(())
}

/// Scene bounds for the parameter table, read without rendering anything.
fn input_bounds(cfg: &RunConfig, command: Command) -> Result<Option<Aabb>> {
    if command == Command::Eval {
        return Ok(None);
    }
    if command == Command::Reconstruct {
        if let Some(dir) = &cfg.paths.dataset {
            return Ok(Some(read_dataset_info(dir)?.bounds));
        }
    }
    match &cfg.paths.scene {
        Some(path) => Ok(Some(SceneDescription::load(path)?.bounds)),
        None => Ok(None),
    }
}

fn synth(cfg: &RunConfig, out: &Path) -> Result<()> {
    let scene = pipeline::load_scene(cfg)?;
    let rig = pipeline::synthesize(&scene, cfg)?;
    let files = pipeline::write_synth_output(out, &scene, &rig)?;
    log::info!("rendered {} views, {} files", rig.len(), files.len());
    Ok(())
}

fn reconstruct(cfg: &RunConfig, out: &Path) -> Result<()> {
    let input = pipeline::load_input(cfg)?;
    let result = pipeline::reconstruct(input.rig, cfg, &PriorRegistry::with_builtins())?;
    let report = pipeline::RunReport::new(&result, input.truth.as_ref())?;
    pipeline::write_reconstruct_output(out, &result, &report)?;
    log::info!(
        "mesh: {} vertices, {} triangles, watertight {}",
        report.mesh_vertices,
        report.mesh_triangles,
        report.mesh_watertight
    );
    if let (Some(a), Some(b)) = (&report.initial_depth_error, &report.final_depth_error) {
        log::info!("depth MAE {:.5} -> {:.5}", a.mae, b.mae);
    }
    Ok(())
}

fn eval(cfg: &RunConfig, out: &Path) -> Result<()> {
    let (mesh, gt) = match (&cfg.paths.mesh, &cfg.paths.gt_mesh) {
        (Some(m), Some(g)) => (m, g),
        _ => return Err(Error::Config("eval needs a mesh and a ground-truth mesh".into())),
    };
    let report = pipeline::evaluate(mesh, gt, cfg)?;
    pipeline::write_metrics(out, &report)?;
    println!(
        "accuracy {:.6} completeness {:.6} chamfer {:.6}",
        report.accuracy, report.completeness, report.chamfer
    );
    Ok(())
}
