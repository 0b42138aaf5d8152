use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use projmatch::eval::compare_clouds;
use projmatch::io::{format_decimal, format_points2, read_cloud, write_cloud};
use projmatch::loss::LossConfig;
use projmatch::optimize::InitMode;
use projmatch::pgm::load_silhouette;
use projmatch::sampling::{sample, SamplerConfig, SamplerMethod};
use projmatch::synth::{focal_for, make_scene, splat_radius_for, SceneParams, ShapeKind, DEFAULT_RING_RADIUS};
use projmatch::Silhouette;
use rayon::prelude::*;

use crate::manifest::{Outputs, RunManifest, RunSettings, MANIFEST_FILE};
use crate::scene_dir::{write_scene, SceneDir};

/// Seeds up to `i64::MAX` so manifests can store them as TOML integers.
fn seed_parser() -> clap::builder::RangedU64ValueParser<u64> {
    clap::value_parser!(u64).range(..=i64::MAX as u64)
}

#[derive(Debug, Parser)]
#[command(name = "projmatch", version, about = "Point clouds from multi-view silhouettes")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Synthesize a scene directory from a built-in shape or a point file.
    Synth(SynthArgs),
    /// Sample supervision points from one silhouette image.
    Sample(SampleArgs),
    /// Optimize a point cloud against a scene directory.
    Reconstruct(ReconstructArgs),
    /// Compare two point clouds.
    Eval(EvalArgs),
    /// Reconstruct once per setting along one axis.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// square, two-bars, helix or file:<path.xyz>
    #[arg(long, default_value = "square")]
    pub shape: ShapeKind,
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    pub views: u64,
    #[arg(long, default_value_t = 64, value_parser = clap::value_parser!(u64).range(1..))]
    pub res: u64,
    #[arg(long, default_value_t = 2048)]
    pub points: usize,
    /// Camera ring radius.
    #[arg(long, default_value_t = DEFAULT_RING_RADIUS)]
    pub radius: f64,
    #[arg(long, default_value_t = 0, value_parser = seed_parser())]
    pub seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    pub image: PathBuf,
    #[arg(long, default_value = "sas")]
    pub method: SamplerMethod,
    #[arg(long, default_value_t = 5000)]
    pub k: usize,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 0, value_parser = seed_parser())]
    pub seed: u64,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum LossVariant {
    Both,
    FirstOnly,
    SecondOnly,
}

impl LossVariant {
    pub fn config(self, nn_first: usize, nn_second: usize) -> LossConfig {
        let base = match self {
            LossVariant::Both => LossConfig::default(),
            LossVariant::FirstOnly => LossConfig::first_only(),
            LossVariant::SecondOnly => LossConfig::second_only(),
        };
        LossConfig { nn_first, nn_second, ..base }
    }

    pub fn name(self) -> &'static str {
        match self {
            LossVariant::Both => "both",
            LossVariant::FirstOnly => "first-only",
            LossVariant::SecondOnly => "second-only",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum InitArg {
    Sphere,
    Cube,
}

/// Flags shared by `reconstruct` and `sweep`.
#[derive(Debug, Args)]
pub struct RunArgs {
    #[arg(long, default_value_t = 3000)]
    pub k: usize,
    #[arg(long, default_value = "sas")]
    pub sampler: SamplerMethod,
    #[arg(long, default_value_t = 0.5)]
    pub threshold: f64,
    #[arg(long, default_value_t = 20_000)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 2048)]
    pub points: usize,
    #[arg(long, value_enum, default_value_t = LossVariant::Both)]
    pub loss: LossVariant,
    /// Neighbors averaged per projection in the first term.
    #[arg(long, default_value_t = 1)]
    pub nn_first: usize,
    /// Neighbors averaged per supervision point in the second term.
    #[arg(long, default_value_t = 1)]
    pub nn_second: usize,
    #[arg(long, default_value_t = 0, value_parser = seed_parser())]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = InitArg::Sphere)]
    pub init: InitArg,
    /// Redraw supervision every N steps (0 keeps it fixed).
    #[arg(long, default_value_t = 0)]
    pub resample_every: usize,
    #[arg(long, default_value_t = 100)]
    pub log_every: usize,
}

impl RunArgs {
    pub fn settings(&self) -> RunSettings {
        let mut s = RunSettings::default();
        s.points = self.points;
        s.sampler = SamplerConfig { method: self.sampler, k_target: self.k, threshold: self.threshold, seed: 0 };
        s.loss = self.loss.config(self.nn_first, self.nn_second);
        s.optim.steps = self.steps;
        s.optim.learning_rate = self.lr;
        s.optim.init = match self.init {
            InitArg::Sphere => InitMode::UnitSphereUniform,
            InitArg::Cube => InitMode::UnitCubeUniform,
        };
        s.optim.resample_every = self.resample_every;
        s.optim.log_every = self.log_every;
        s.with_seed(self.seed)
    }
}

#[derive(Debug, Args)]
pub struct ReconstructArgs {
    /// Scene directory; may be omitted with --manifest.
    #[arg(required_unless_present = "manifest")]
    pub scene: Option<PathBuf>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Output directory (defaults to the scene directory).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Re-run exactly the configuration recorded in a manifest; other flags
    /// are ignored.
    #[arg(long)]
    pub manifest: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    pub a: PathBuf,
    pub b: PathBuf,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum SweepAxis {
    LossVariant,
    K,
    Sampler,
    Resolution,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    pub scene: PathBuf,
    #[arg(long, value_enum)]
    pub axis: SweepAxis,
    /// Comma-separated settings; each axis has a default list.
    #[arg(long, value_delimiter = ',')]
    pub values: Vec<String>,
    #[command(flatten)]
    pub run: RunArgs,
    /// Run settings concurrently.
    #[arg(long)]
    pub parallel: bool,
    /// Output CSV (defaults to `<scene>/sweep_<axis>.csv`).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Synth(a) => cmd_synth(&a),
        Command::Sample(a) => cmd_sample(&a),
        Command::Reconstruct(a) => cmd_reconstruct(&a).map(|_| ()),
        Command::Eval(a) => {
            println!("{}", cmd_eval(&a.a, &a.b)?);
            Ok(())
        }
        Command::Sweep(a) => {
            let rows = cmd_sweep(&a)?;
            for r in rows {
                println!("{r}");
            }
            Ok(())
        }
    }
}

pub fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let size = a.res as usize;
    let params = SceneParams {
        points: a.points,
        views: a.views as usize,
        image_size: size,
        ring_radius: a.radius,
        focal: focal_for(size),
        splat_radius: splat_radius_for(size),
        seed: a.seed,
    };
    let scene = make_scene(&a.shape, &params)?;
    write_scene(&a.out, &scene)
}

pub fn cmd_sample(a: &SampleArgs) -> Result<()> {
    let sil: Silhouette = load_silhouette(&a.image)?;
    let cfg = SamplerConfig { method: a.method, k_target: a.k, threshold: a.threshold, seed: a.seed };
    let pts = sample(&sil, &cfg).with_context(|| format!("sampling {}", a.image.display()))?;
    let text = format_points2(&pts);
    match &a.out {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display()))?,
        None => std::io::stdout().write_all(text.as_bytes())?,
    }
    Ok(())
}

/// Runs and writes `recon.xyz`, `trace.csv` and `manifest.toml`; returns the
/// manifest used.
pub fn cmd_reconstruct(a: &ReconstructArgs) -> Result<RunManifest> {
    let manifest = match &a.manifest {
        Some(path) => RunManifest::read(path)?,
        None => {
            let scene = a.scene.clone().expect("clap requires a scene without --manifest");
            let out = a.out.clone().unwrap_or_else(|| scene.clone());
            RunManifest { scene, run: a.run.settings(), outputs: Outputs::in_dir(&out) }
        }
    };
    reconstruct(&manifest)?;
    Ok(manifest)
}

pub fn reconstruct(m: &RunManifest) -> Result<()> {
    let scene = SceneDir::load(&m.scene)?;
    let (cloud, trace) = m
        .run
        .run(&scene.pairs(), scene.gt.as_ref())
        .with_context(|| format!("reconstructing {}", m.scene.display()))?;
    for path in [&m.outputs.recon, &m.outputs.trace] {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        }
    }
    write_cloud(&m.outputs.recon, &cloud)?;
    fs::write(&m.outputs.trace, trace.to_csv()).with_context(|| format!("writing {}", m.outputs.trace.display()))?;
    let manifest_path = m.outputs.recon.with_file_name(MANIFEST_FILE);
    m.write(&manifest_path)
}

/// The `cd=<v> iou=<v>` line for two cloud files.
pub fn cmd_eval(a: &Path, b: &Path) -> Result<String> {
    let ca = read_cloud(a)?;
    let cb = read_cloud(b)?;
    let (cd, iou) = compare_clouds(&ca, &cb)?;
    Ok(eval_line(cd, iou))
}

pub fn eval_line(cd: f64, iou: f64) -> String {
    format!("cd={cd:.6} iou={iou:.6}")
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub setting: String,
    pub final_loss: f64,
    pub cd_vs_gt: f64,
}

impl fmt::Display for SweepRow {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{},{},{}", self.setting, format_decimal(self.final_loss), format_decimal(self.cd_vs_gt))
    }
}

pub const SWEEP_HEADER: &str = "setting,final_loss,cd_vs_gt";

fn default_values(axis: SweepAxis) -> Vec<String> {
    let v: &[&str] = match axis {
        SweepAxis::LossVariant => &["first-only", "second-only", "both"],
        SweepAxis::K => &["1000", "3000", "5000"],
        SweepAxis::Sampler => &["sas", "random", "pixel", "pixel+random", "poisson-disk", "dynamic"],
        SweepAxis::Resolution => &["32", "64", "128"],
    };
    v.iter().map(|s| s.to_string()).collect()
}

fn parse_value<T: FromStr>(axis: SweepAxis, v: &str) -> Result<T> {
    v.parse().map_err(|_| anyhow::anyhow!("invalid {axis:?} setting {v:?}"))
}

pub fn cmd_sweep(a: &SweepArgs) -> Result<Vec<SweepRow>> {
    let scene = SceneDir::load(&a.scene)?;
    let gt = scene
        .gt
        .clone()
        .with_context(|| format!("sweeps need {}", scene.gt_path().display()))?;
    let values = if a.values.is_empty() { default_values(a.axis) } else { a.values.clone() };
    let base = a.run.settings();

    // resolve every setting before running anything
    let mut jobs = Vec::with_capacity(values.len());
    for v in &values {
        let mut settings = base.clone();
        let mut pairs = None;
        match a.axis {
            SweepAxis::LossVariant => {
                let variant = LossVariant::from_str(v, true).map_err(|e| anyhow::anyhow!(e))?;
                settings.loss = variant.config(a.run.nn_first, a.run.nn_second);
            }
            SweepAxis::K => settings.sampler.k_target = parse_value(a.axis, v)?,
            SweepAxis::Sampler => settings.sampler.method = parse_value(a.axis, v)?,
            SweepAxis::Resolution => {
                let size: usize = parse_value(a.axis, v)?;
                if size == 0 {
                    bail!("resolution must be positive");
                }
                let spec = scene.spec()?.rescaled(size)?;
                let sils = spec.silhouettes()?;
                pairs = Some(spec.views.iter().map(|v| v.camera.clone()).zip(sils).collect::<Vec<_>>());
            }
        }
        jobs.push((v.clone(), settings, pairs.unwrap_or_else(|| scene.pairs())));
    }

    let run_one = |(name, settings, pairs): &(String, RunSettings, Vec<_>)| -> Result<SweepRow> {
        let (cloud, trace) = settings.run(pairs, Some(&gt)).with_context(|| format!("sweep setting {name}"))?;
        let final_loss = trace.final_loss().expect("trace has at least one step");
        let cd_vs_gt = projmatch::eval::chamfer_3d(&cloud, &gt)?;
        Ok(SweepRow { setting: name.clone(), final_loss, cd_vs_gt })
    };
    let rows: Vec<SweepRow> = if a.parallel {
        jobs.par_iter().map(run_one).collect::<Result<_>>()?
    } else {
        jobs.iter().map(run_one).collect::<Result<_>>()?
    };

    let out = a.out.clone().unwrap_or_else(|| {
        let axis = a.axis.to_possible_value().expect("no skipped variants");
        a.scene.join(format!("sweep_{}.csv", axis.get_name()))
    });
    let mut text = String::from(SWEEP_HEADER);
    text.push('\n');
    for r in &rows {
        text.push_str(&r.to_string());
        text.push('\n');
    }
    fs::write(&out, text).with_context(|| format!("writing {}", out.display()))?;
    Ok(rows)
}
