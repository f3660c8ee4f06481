use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use srdf::config::RunConfig;
use srdf::io::{write_pfm, FloatGrid};
use tempfile::TempDir;

const SCENE: &str = r#"
bounds = { min = [-1.0, -1.0, -1.0], max = [1.0, 1.0, 1.0] }
noise = 0.01

[[shapes]]
geometry = { type = "sphere", center = [0.0, 0.0, 0.0], radius = 0.6 }
albedo = { type = "sines", seed = 1, frequency = 6.0 }
"#;

const CONFIG: &str = r#"
seed = 3
threads = 2

[paths]
scene = "scene.toml"

[rig]
count = 16
width = 40
height = 40
fov_deg = 32.0

[init]
resolution = 40

[schedule]
offset_init = 0.1
stages = 2
epochs_per_stage = 3

[fusion]
resolution = 40

[metrics]
samples = 3000
"#;

struct Workspace {
    dir: TempDir,
}

impl Workspace {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("scene.toml"), SCENE).unwrap();
        fs::write(dir.path().join("run.toml"), CONFIG).unwrap();
        Self { dir }
    }

    fn path(&self, rel: &str) -> PathBuf {
        self.dir.path().join(rel)
    }

    fn srdf(&self, args: &[&str]) -> Output {
        Command::new(env!("CARGO_BIN_EXE_srdf"))
            .args(args)
            .env("RUST_LOG", "warn")
            .output()
            .unwrap()
    }

    /// Runs `srdf <sub> --config run.toml --out <out> <extra>`.
    fn run(&self, sub: &str, out: &str, extra: &[&str]) -> Output {
        let config = self.path("run.toml");
        let out = self.path(out);
        let mut args = vec![
            sub,
            "--config",
            config.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ];
        args.extend_from_slice(extra);
        self.srdf(&args)
    }
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn assert_success(o: &Output) {
    assert!(o.status.success(), "exit {:?}: {}", o.status.code(), stderr(o));
}

/// `path sha256` lines of a manifest.
fn manifest(dir: &Path) -> Vec<String> {
    let json: Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    json["files"]
        .as_array()
        .unwrap()
        .iter()
        .map(|f| {
            format!(
                "{} {}",
                f["path"].as_str().unwrap(),
                f["sha256"].as_str().unwrap()
            )
        })
        .collect()
}

fn count_files(dir: &Path, ext: &str) -> usize {
    fs::read_dir(dir)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == ext))
        .count()
}

#[test]
fn synth_writes_the_full_inventory_reproducibly() {
    let ws = Workspace::new();
    assert_success(&ws.run("synth", "a", &[]));
    let a = ws.path("a");
    assert_eq!(count_files(&a.join("images"), "png"), 16);
    assert_eq!(count_files(&a.join("masks"), "png"), 16);
    assert_eq!(count_files(&a.join("depth"), "pfm"), 16);
    assert_eq!(manifest(&a).len(), 16 * 3 + 3);

    assert_success(&ws.run("synth", "b", &[]));
    assert_eq!(manifest(&a), manifest(&ws.path("b")));

    assert_success(&ws.run("synth", "c", &["--seed", "4"]));
    assert_ne!(manifest(&a), manifest(&ws.path("c")));
}

#[test]
fn missing_scene_is_a_validation_error_naming_the_path() {
    let ws = Workspace::new();
    let scene = ws.path("no_such_scene.toml");
    let out = ws.run("synth", "a", &["--scene", scene.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains(scene.to_str().unwrap()), "{}", stderr(&out));
    assert!(!ws.path("a").exists());
}

#[test]
fn dry_run_prints_a_reparseable_table_and_writes_nothing() {
    let ws = Workspace::new();
    let out = ws.run("reconstruct", "r", &["--dry-run", "--seed", "11"]);
    assert_success(&out);
    assert!(!ws.path("r").exists());
    let table = String::from_utf8(out.stdout).unwrap();
    assert!(table.contains("# stage 1: offset 0.05"), "{table}");
    let echoed = RunConfig::from_toml(&table).unwrap();
    let mut expected = RunConfig::load(&ws.path("run.toml")).unwrap();
    expected.seed = 11;
    expected.paths.out = Some(ws.path("r"));
    assert_eq!(echoed, expected);
}

#[test]
fn invalid_parameters_exit_with_code_2() {
    let ws = Workspace::new();
    fs::write(ws.path("bad.toml"), "[schedule]\nsamples_per_ray = 4\n").unwrap();
    let config = ws.path("bad.toml");
    let out = ws.srdf(&["reconstruct", "--config", config.to_str().unwrap(), "--dry-run"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error: config:"), "{}", stderr(&out));

    fs::write(ws.path("typo.toml"), "[fusion]\nresolutoin = 64\n").unwrap();
    let config = ws.path("typo.toml");
    let out = ws.srdf(&["reconstruct", "--config", config.to_str().unwrap(), "--dry-run"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reconstruct_is_byte_identical_across_runs() {
    let ws = Workspace::new();
    assert_success(&ws.run("synth", "data", &[]));
    let dataset = ws.path("data");
    let args = ["--dataset", dataset.to_str().unwrap()];
    assert_success(&ws.run("reconstruct", "r1", &args));
    assert_success(&ws.run("reconstruct", "r2", &["--threads", "1", args[0], args[1]]));
    let (r1, r2) = (ws.path("r1"), ws.path("r2"));
    assert_eq!(manifest(&r1), manifest(&r2));
    assert_eq!(count_files(&r1.join("depth"), "pfm"), 16);
    for f in ["mesh.ply", "mesh.obj", "energy.csv", "report.json", "timing.csv"] {
        assert!(r1.join(f).is_file(), "{f}");
    }
    let report: Value = serde_json::from_str(&fs::read_to_string(r1.join("report.json")).unwrap()).unwrap();
    assert!(report["mesh_triangles"].as_u64().unwrap() > 0);
    assert!(
        report["final_depth_error"]["mae"].as_f64().unwrap()
            < report["initial_depth_error"]["mae"].as_f64().unwrap()
    );
}

#[test]
fn import_with_mismatched_dimensions_names_the_camera() {
    let ws = Workspace::new();
    let depth = ws.path("depth_in");
    for j in 0..16 {
        let size = if j == 5 { 32 } else { 40 };
        let grid = FloatGrid {
            width: size,
            height: size,
            data: vec![4.0; size * size],
        };
        write_pfm(&depth.join(format!("view_{j:03}.pfm")), &grid).unwrap();
    }
    let config = CONFIG.replace(
        "[init]\n",
        "[init]\nmode = \"import\"\ndepth_dir = \"depth_in\"\n",
    );
    fs::write(ws.path("run.toml"), config).unwrap();
    let out = ws.run("reconstruct", "r", &[]);
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
    assert!(stderr(&out).contains("camera 5"), "{}", stderr(&out));
}

#[test]
fn eval_of_a_mesh_against_itself_is_zero_and_matches_the_schema() {
    let ws = Workspace::new();
    assert_success(&ws.run("synth", "data", &[]));
    let gt = ws.path("data/gt_mesh.ply");
    let out = ws.run(
        "eval",
        "e",
        &["--mesh", gt.to_str().unwrap(), "--gt", gt.to_str().unwrap()],
    );
    assert_success(&out);
    let report: Value =
        serde_json::from_str(&fs::read_to_string(ws.path("e/metrics.json")).unwrap()).unwrap();
    assert_eq!(report["chamfer"].as_f64(), Some(0.0));
    assert_eq!(report["accuracy"].as_f64(), Some(0.0));
    assert_eq!(report["completeness"].as_f64(), Some(0.0));

    let schema_path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../docs/metrics_report.schema.json");
    let schema: Value = serde_json::from_str(&fs::read_to_string(schema_path).unwrap()).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    assert!(validator.is_valid(&report), "{report}");
    let mut broken = report.clone();
    broken["chamfer"] = Value::from("zero");
    assert!(!validator.is_valid(&broken));

    let csv = fs::read_to_string(ws.path("e/metrics.csv")).unwrap();
    assert!(csv.starts_with("accuracy,completeness,chamfer"));
}

#[test]
fn eval_with_a_missing_ground_truth_exits_with_code_2() {
    let ws = Workspace::new();
    assert_success(&ws.run("synth", "data", &[]));
    let mesh = ws.path("data/gt_mesh.ply");
    let gt = ws.path("missing.ply");
    let out = ws.run(
        "eval",
        "e",
        &["--mesh", mesh.to_str().unwrap(), "--gt", gt.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).contains("missing.ply"));

    fs::write(ws.path("garbage.ply"), "not a mesh").unwrap();
    let gt = ws.path("garbage.ply");
    let out = ws.run(
        "eval",
        "e",
        &["--mesh", mesh.to_str().unwrap(), "--gt", gt.to_str().unwrap()],
    );
    assert_eq!(out.status.code(), Some(2), "{}", stderr(&out));
}
