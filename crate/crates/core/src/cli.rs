//! Command-line front end.

use std::ffi::OsString;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use ndarray::{Array2, Array3};
use serde::Serialize;

use crate::anchors::{fitting_error, AnchorSet};
use crate::config::Config;
use crate::error::{Error, Result, StageExt};
use crate::eval::{curves_csv, evaluate, MetricsReport};
use crate::geometry::{decompose_rotation, CameraIntrinsics, Grasp2D5, Grasp6D};
use crate::heatmap::HeatmapSet;
use crate::io::{read_array, read_json, read_jsonl, read_map, write_array, write_json, write_jsonl, Format};
use crate::losses::{heatmap_losses, LossReport};
use crate::pipeline::{
    dump, run_aggregate, run_anchors, run_decode, run_encode, run_pipeline, write_grasps, write_heatmaps,
    PipelineInput,
};
use crate::scenegen::{generate_scene, Scene, SceneDescription};

#[derive(Debug, Parser)]
#[command(name = "graspmap", version, about = "Heatmap-guided 6-DoF grasp detection toolkit")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

/// Flags shared by every subcommand; each one overrides a config field.
#[derive(Debug, Clone, Default, Args)]
pub struct GlobalArgs {
    /// JSON config overriding the built-in defaults.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Scene seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Depth noise standard deviation in meters.
    #[arg(long, global = true)]
    pub noise_sigma: Option<f64>,
    /// Number of heatmap cells lifted to regions.
    #[arg(long, global = true)]
    pub k_center: Option<usize>,
    /// Directory receiving the effective config and intermediate artifacts.
    #[arg(long, global = true)]
    pub dump_dir: Option<PathBuf>,
    /// CSV file receiving the quality curves.
    #[arg(long, global = true)]
    pub curves_out: Option<PathBuf>,
    /// Format of array artifacts.
    #[arg(long, global = true, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic scene: description, depth and labels.
    Synth {
        #[arg(long)]
        out: PathBuf,
    },
    /// Encode a scene's labels into heatmaps.
    Encode {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Fit rotation anchors to label angles.
    ShiftAnchors {
        /// Scene directory whose labels provide the angles.
        #[arg(long, conflicts_with_all = ["labels", "samples"])]
        scene: Option<PathBuf>,
        /// JSONL of camera-frame grasp poses.
        #[arg(long, conflicts_with = "samples")]
        labels: Option<PathBuf>,
        /// JSONL of `[gamma, beta]` pairs.
        #[arg(long)]
        samples: Option<PathBuf>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Select heatmap peaks and crop point regions.
    Aggregate {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Decode teacher predictions into grasps (after NMS).
    Decode {
        #[arg(long)]
        scene: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score predicted grasps against a scene's labels.
    Evaluate {
        #[arg(long)]
        scene: PathBuf,
        /// JSONL of predicted grasps.
        #[arg(long)]
        pred: PathBuf,
        /// Also report heatmap losses.
        #[arg(long)]
        losses: bool,
        /// Directory of predicted maps (as written by `encode`); defaults to
        /// the configured perturbation of the targets.
        #[arg(long, requires = "losses")]
        maps: Option<PathBuf>,
    },
    /// Run the whole chain and report metrics.
    Pipeline {
        /// Scene directory; a scene is generated from the config otherwise.
        #[arg(long)]
        scene: Option<PathBuf>,
        #[arg(long)]
        losses: bool,
    },
}

impl GlobalArgs {
    /// The config file (or defaults) with flag overrides applied.
    pub fn effective_config(&self) -> Result<Config> {
        let mut cfg = match &self.config {
            Some(p) => Config::load(p).stage("config")?,
            None => Config::default(),
        };
        if let Some(s) = self.seed {
            cfg.scene.seed = s;
        }
        if let Some(s) = self.noise_sigma {
            cfg.scene.noise_sigma = s;
        }
        if let Some(k) = self.k_center {
            cfg.aggregation.k_center = k;
        }
        if let Some(d) = &self.dump_dir {
            cfg.output.dump_dir = Some(d.clone());
        }
        if let Some(c) = &self.curves_out {
            cfg.output.curves_out = Some(c.clone());
        }
        if let Some(f) = self.format {
            cfg.output.format = f;
        }
        cfg.validate().stage("config")?;
        Ok(cfg)
    }
}

const SCENE_FILE: &str = "scene.json";
const LABELS_FILE: &str = "labels.jsonl";
const INTRINSICS_FILE: &str = "intrinsics.json";

fn find_depth(dir: &Path) -> Result<PathBuf> {
    for ext in ["pfm", "ght", "json"] {
        let p = dir.join(format!("depth.{ext}"));
        if p.exists() {
            return Ok(p);
        }
    }
    Err(Error::InvalidInput(format!("no depth.{{pfm,ght,json}} in {}", dir.display())))
}

/// Loads a scene directory. With `scene.json` the scene is rebuilt exactly
/// (a `--noise-sigma` flag re-renders the observation); otherwise depth,
/// labels and intrinsics are read from their files.
fn load_input(dir: &Path, cfg: &mut Config, noise_flag: Option<f64>) -> Result<(Option<Scene>, PipelineInput)> {
    let desc_path = dir.join(SCENE_FILE);
    if desc_path.exists() {
        let mut desc: SceneDescription = read_json(&desc_path)?;
        if let Some(s) = noise_flag {
            desc.spec.noise_sigma = s;
        }
        let scene = Scene::from_description(&desc)?;
        cfg.scene = desc.spec;
        let input = PipelineInput::from_scene(&scene, cfg)?;
        return Ok((Some(scene), input));
    }
    let depth = read_map(&find_depth(dir)?)?;
    let intr: CameraIntrinsics = if dir.join(INTRINSICS_FILE).exists() {
        read_json(&dir.join(INTRINSICS_FILE))?
    } else {
        cfg.scene.intrinsics
    };
    intr.validate()?;
    cfg.scene.intrinsics = intr;
    let poses: Vec<Grasp6D> = read_jsonl(&dir.join(LABELS_FILE))?;
    let input = PipelineInput::from_observation(depth, intr, &poses, cfg)?;
    Ok((None, input))
}

fn to_stdout<T: Serialize>(out: &mut dyn Write, value: &T) -> Result<()> {
    serde_json::to_writer_pretty(&mut *out, value)?;
    out.write_all(b"\n")?;
    Ok(())
}

fn dump_config(cfg: &Config) -> Result<()> {
    if let Some(dir) = &cfg.output.dump_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join("config.json"), cfg.to_json()?)?;
    }
    Ok(())
}

fn write_curves(cfg: &Config, report: &MetricsReport) -> Result<()> {
    if let Some(path) = &cfg.output.curves_out {
        std::fs::write(path, curves_csv(&report.curve))?;
    }
    Ok(())
}

#[derive(Serialize)]
struct MetricsSummary {
    #[serde(rename = "CR")]
    cr: f64,
    #[serde(rename = "CFR")]
    cfr: f64,
    #[serde(rename = "AS")]
    as_mean: f64,
    num_pred: usize,
    num_gt: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    losses: Option<LossReport>,
}

impl MetricsSummary {
    fn new(r: &MetricsReport, losses: Option<LossReport>) -> Self {
        Self {
            cr: r.cr,
            cfr: r.cfr,
            as_mean: r.as_mean,
            num_pred: r.num_pred,
            num_gt: r.num_gt,
            losses,
        }
    }
}

fn find_map(dir: &Path, name: &str) -> Option<PathBuf> {
    ["json", "ght", "pfm"]
        .iter()
        .map(|e| dir.join(format!("{name}.{e}")))
        .find(|p| p.exists())
}

fn read_map3(dir: &Path, name: &str) -> Result<Array3<f64>> {
    if let Some(p) = find_map(dir, name) {
        let a = read_array(&p)?;
        let shape = a.shape().to_vec();
        return a
            .into_dimensionality()
            .map_err(|_| Error::Shape(format!("{} is not 3-D (shape {shape:?})", p.display())));
    }
    // PFM stores one file per channel.
    let mut channels: Vec<Array2<f64>> = Vec::new();
    loop {
        let p = dir.join(format!("{name}_{}.pfm", channels.len()));
        if !p.exists() {
            break;
        }
        channels.push(read_map(&p)?);
    }
    if channels.is_empty() {
        return Err(Error::InvalidInput(format!("no {name} map in {}", dir.display())));
    }
    let views: Vec<_> = channels.iter().map(|c| c.view()).collect();
    ndarray::stack(ndarray::Axis(2), &views).map_err(|e| Error::Shape(e.to_string()))
}

fn read_heatmaps(dir: &Path) -> Result<HeatmapSet> {
    let map2 = |name: &str| {
        find_map(dir, name)
            .ok_or_else(|| Error::InvalidInput(format!("no {name} map in {}", dir.display())))
            .and_then(|p| read_map(&p))
    };
    Ok(HeatmapSet {
        confidence: map2("confidence")?,
        theta: read_map3(dir, "theta")?,
        theta_offset: read_map3(dir, "theta_offset")?,
        width: map2("width")?,
        depth: map2("depth")?,
    })
}

#[derive(Serialize)]
struct AnchorReport<'a> {
    anchors: &'a AnchorSet,
    samples: usize,
    error_uniform: (f64, f64),
    error_shifted: (f64, f64),
}

fn anchor_samples(
    scene: Option<&Path>,
    labels: Option<&Path>,
    samples: Option<&Path>,
    cfg: &mut Config,
) -> Result<Vec<(f64, f64)>> {
    if let Some(p) = samples {
        let raw: Vec<[f64; 2]> = read_jsonl(p)?;
        return Ok(raw.into_iter().map(|[g, b]| (g, b)).collect());
    }
    if let Some(dir) = scene {
        let (_, input) = load_input(dir, cfg, None)?;
        return Ok(input.labels.iter().map(|l| (l.grasp.gamma, l.grasp.beta)).collect());
    }
    let Some(p) = labels else {
        return Err(Error::InvalidInput("one of --scene, --labels or --samples is required".into()));
    };
    let poses: Vec<Grasp6D> = read_jsonl(p)?;
    Ok(poses
        .iter()
        .filter_map(|g| decompose_rotation(&g.rotation()).ok())
        .map(|e| (e.gamma, e.beta))
        .collect())
}

/// Runs one invocation, writing the primary result to `out`.
pub fn run(cli: Cli, out: &mut dyn Write) -> Result<()> {
    let mut cfg = cli.global.effective_config()?;
    let noise_flag = cli.global.noise_sigma;
    match cli.command {
        Command::Synth { out: dir } => {
            dump_config(&cfg)?;
            let scene = generate_scene(&cfg.scene).stage("synth")?;
            std::fs::create_dir_all(&dir)?;
            let format = cfg.output.format;
            write_json(&dir.join(SCENE_FILE), &scene.description())?;
            write_json(&dir.join(INTRINSICS_FILE), scene.intrinsics())?;
            write_array(&dir.join(format!("depth.{}", format.extension())), &scene.depth.clone().into_dyn(), format)?;
            write_grasps(&dir.join(LABELS_FILE), &scene.label_poses())?;
            let planar: Vec<Grasp2D5> = scene.labels.iter().map(|l| l.grasp.grasp).collect();
            write_jsonl(&dir.join("labels_2d.jsonl"), &planar)?;
            #[derive(Serialize)]
            struct SynthSummary {
                seed: u64,
                objects: usize,
                labels: usize,
                noise_sigma: f64,
            }
            to_stdout(
                out,
                &SynthSummary {
                    seed: scene.spec.seed,
                    objects: scene.objects.len(),
                    labels: scene.labels.len(),
                    noise_sigma: scene.spec.noise_sigma,
                },
            )
        }
        Command::Encode { scene, out: dir } => {
            let (_, input) = load_input(&scene, &mut cfg, noise_flag).stage("load")?;
            dump_config(&cfg)?;
            let (targets, _) = run_encode(&input, &cfg)?;
            std::fs::create_dir_all(&dir)?;
            write_heatmaps(&dir, "", &targets, cfg.output.format)?;
            #[derive(Serialize)]
            struct EncodeSummary {
                labels: usize,
                confidence: (usize, usize),
                grid: (usize, usize, usize),
            }
            to_stdout(
                out,
                &EncodeSummary {
                    labels: input.labels.len(),
                    confidence: targets.confidence.dim(),
                    grid: targets.theta.dim(),
                },
            )
        }
        Command::ShiftAnchors {
            scene,
            labels,
            samples,
            out: path,
        } => {
            let samples = anchor_samples(scene.as_deref(), labels.as_deref(), samples.as_deref(), &mut cfg)
                .stage("load")?;
            dump_config(&cfg)?;
            let a = &cfg.anchors;
            let uniform = AnchorSet::uniform(a.k_r, a.flush_threshold, a.iterations)?;
            let mut shifted = uniform.clone();
            shifted.fit(&samples, a.fit_rounds).stage("anchors")?;
            let g: Vec<f64> = samples.iter().map(|s| s.0).collect();
            let b: Vec<f64> = samples.iter().map(|s| s.1).collect();
            let err = |set: &AnchorSet| -> Result<(f64, f64)> {
                Ok((fitting_error(set.gamma(), &g)?, fitting_error(set.beta(), &b)?))
            };
            let report = AnchorReport {
                anchors: &shifted,
                samples: samples.len(),
                error_uniform: err(&uniform)?,
                error_shifted: err(&shifted)?,
            };
            if let Some(p) = path {
                write_json(&p, &shifted)?;
            }
            to_stdout(out, &report)
        }
        Command::Aggregate { scene, out: path } => {
            let (_, input) = load_input(&scene, &mut cfg, noise_flag).stage("load")?;
            dump_config(&cfg)?;
            let (_, heatmaps) = run_encode(&input, &cfg)?;
            let (_, regions) = run_aggregate(&input, &heatmaps, &cfg)?;
            match path {
                Some(p) => write_json(&p, &regions),
                None => to_stdout(out, &regions),
            }
        }
        Command::Decode { scene, out: path } => {
            let (_, input) = load_input(&scene, &mut cfg, noise_flag).stage("load")?;
            dump_config(&cfg)?;
            let anchors = run_anchors(&input.labels, &cfg).stage("anchors")?;
            let (_, heatmaps) = run_encode(&input, &cfg)?;
            let (_, regions) = run_aggregate(&input, &heatmaps, &cfg)?;
            let (_, decoded) = run_decode(&input, &regions, &anchors, &cfg)?;
            let grasps: Vec<Grasp6D> = decoded.iter().map(|d| d.grasp).collect();
            match path {
                Some(p) => write_grasps(&p, &grasps),
                None => {
                    for g in &grasps {
                        serde_json::to_writer(&mut *out, g)?;
                        out.write_all(b"\n")?;
                    }
                    Ok(())
                }
            }
        }
        Command::Evaluate {
            scene,
            pred,
            losses,
            maps,
        } => {
            cfg.pipeline.losses = cfg.pipeline.losses || losses;
            let (_, input) = load_input(&scene, &mut cfg, noise_flag).stage("load")?;
            dump_config(&cfg)?;
            let grasps: Vec<Grasp6D> = read_jsonl(&pred).stage("load")?;
            let report = evaluate(&grasps, &input.label_poses(), &input.eval_cloud, &cfg.scene.gripper, &cfg.eval)
                .stage("evaluate")?;
            write_curves(&cfg, &report)?;
            let loss = if cfg.pipeline.losses {
                let (targets, perturbed) = run_encode(&input, &cfg)?;
                let predicted = match &maps {
                    Some(dir) => read_heatmaps(dir).stage("load")?,
                    None => perturbed,
                };
                Some(heatmap_losses(&predicted, &targets, &cfg.losses).stage("losses")?)
            } else {
                None
            };
            to_stdout(out, &MetricsSummary::new(&report, loss))
        }
        Command::Pipeline { scene, losses } => {
            cfg.pipeline.losses = cfg.pipeline.losses || losses;
            let input = match &scene {
                Some(dir) => load_input(dir, &mut cfg, noise_flag).stage("load")?.1,
                None => {
                    let s = generate_scene(&cfg.scene).stage("synth")?;
                    PipelineInput::from_scene(&s, &cfg).stage("input")?
                }
            };
            let result = run_pipeline(&input, &cfg)?;
            if let Some(dir) = &cfg.output.dump_dir {
                dump(&result, &cfg, dir)?;
            }
            write_curves(&cfg, &result.report)?;
            to_stdout(out, &MetricsSummary::new(&result.report, result.losses))
        }
    }
}

/// Parses `args`, runs, and maps the outcome to an exit code.
pub fn main_with<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = write!(err, "{e}");
            return code;
        }
    };
    match run(cli, out) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            1
        }
    }
}

pub fn main() -> i32 {
    let stdout = std::io::stdout();
    let stderr = std::io::stderr();
    main_with(std::env::args_os(), &mut stdout.lock(), &mut stderr.lock())
}
