//! End-to-end teacher-forced run: encode, select, aggregate, decode, evaluate.

use std::path::Path;

use ndarray::ArrayD;
use serde::Serialize;

use crate::aggregation::{aggregate_regions, select_centers, Region, RegionCenter};
use crate::anchors::AnchorSet;
use crate::config::{Config, EvalCloud};
use crate::decode::{decode_region_traced, nms_indices, teacher_predictions, DecodedGrasp, RegionPrediction};
use crate::error::{Result, StageExt};
use crate::eval::{curves_csv, evaluate, MetricsReport};
use crate::geometry::{CameraIntrinsics, DepthMap, Grasp6D, ProjectedGrasp};
use crate::heatmap::{encode, perturb_heatmaps, HeatmapSet, PixelGrasp};
use crate::io::{write_array, write_json, write_jsonl, Format};
use crate::losses::{heatmap_losses, LossReport};
use crate::pointops::{depth_to_cloud, estimate_normals, PointCloud};
use crate::scenegen::{generate_scene, Scene};

/// Everything a run needs besides the configuration.
#[derive(Debug, Clone)]
pub struct PipelineInput {
    /// Observed depth; regions are cut from its cloud.
    pub depth: DepthMap,
    pub intrinsics: CameraIntrinsics,
    /// Ground truth projected onto the image.
    pub labels: Vec<ProjectedGrasp>,
    /// Scene cloud with normals for the metrics.
    pub eval_cloud: PointCloud,
}

fn depth_eval_cloud(depth: &DepthMap, intr: &CameraIntrinsics, cfg: &Config) -> Result<PointCloud> {
    let cloud = depth_to_cloud(depth, intr, cfg.pipeline.cloud_stride)?;
    Ok(estimate_normals(&cloud, cfg.pipeline.normal_k)?.0)
}

impl PipelineInput {
    /// Uses the scene's noisy depth, its labels (projected on clean depth)
    /// and the cloud selected by `cfg.pipeline.eval_cloud`.
    pub fn from_scene(scene: &Scene, cfg: &Config) -> Result<Self> {
        let eval_cloud = match cfg.pipeline.eval_cloud {
            EvalCloud::Analytic => scene.surface_cloud(),
            EvalCloud::Depth => depth_eval_cloud(&scene.depth, scene.intrinsics(), cfg)?,
        };
        Ok(Self {
            depth: scene.depth.clone(),
            intrinsics: *scene.intrinsics(),
            labels: scene.projected_labels(),
            eval_cloud,
        })
    }

    /// Builds an input from a depth map and camera-frame label poses alone.
    /// Labels are projected on `depth` and metrics use its cloud.
    pub fn from_observation(
        depth: DepthMap,
        intrinsics: CameraIntrinsics,
        poses: &[Grasp6D],
        cfg: &Config,
    ) -> Result<Self> {
        let labels = poses
            .iter()
            .map(|p| ProjectedGrasp::from_pose(p, &depth, &intrinsics))
            .collect::<Result<Vec<_>>>()?;
        let eval_cloud = depth_eval_cloud(&depth, &intrinsics, cfg)?;
        Ok(Self {
            depth,
            intrinsics,
            labels,
            eval_cloud,
        })
    }

    pub fn label_poses(&self) -> Vec<Grasp6D> {
        self.labels.iter().map(|l| l.pose).collect()
    }
}

/// All intermediate artifacts of a run.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub anchors: AnchorSet,
    /// Maps encoded from the labels.
    pub targets: HeatmapSet,
    /// Maps driving the run: the targets, perturbed when configured.
    pub heatmaps: HeatmapSet,
    pub centers: Vec<RegionCenter>,
    pub regions: Vec<Region>,
    pub predictions: Vec<RegionPrediction>,
    /// Survivors of NMS, best first.
    pub decoded: Vec<DecodedGrasp>,
    pub report: MetricsReport,
    /// Present when `cfg.pipeline.losses` is set.
    pub losses: Option<LossReport>,
}

impl PipelineOutput {
    pub fn grasps(&self) -> Vec<Grasp6D> {
        self.decoded.iter().map(|d| d.grasp).collect()
    }
}

/// Seed for heatmap perturbation, derived from the scene seed.
pub fn heatmap_noise_seed(scene_seed: u64) -> u64 {
    scene_seed.wrapping_mul(0x2545_f491_4f6c_dd1d) ^ 0x5851_f42d
}

/// Anchors for a run: uniform, or fitted to the label angles.
pub fn run_anchors(labels: &[ProjectedGrasp], cfg: &Config) -> Result<AnchorSet> {
    let a = &cfg.anchors;
    let mut set = AnchorSet::uniform(a.k_r, a.flush_threshold, a.iterations)?;
    if a.shift_on_labels && !labels.is_empty() {
        let samples: Vec<(f64, f64)> = labels.iter().map(|l| (l.grasp.gamma, l.grasp.beta)).collect();
        set.fit(&samples, a.fit_rounds)?;
    }
    Ok(set)
}

/// Encodes the labels and, if configured, perturbs the maps.
pub fn run_encode(input: &PipelineInput, cfg: &Config) -> Result<(HeatmapSet, HeatmapSet)> {
    let pixel: Vec<PixelGrasp> = input.labels.iter().map(PixelGrasp::from).collect();
    let targets = encode(&pixel, &cfg.heatmap).stage("encode")?;
    let heatmaps = if cfg.pipeline.heatmap_noise > 0.0 {
        perturb_heatmaps(&targets, cfg.pipeline.heatmap_noise, heatmap_noise_seed(cfg.scene.seed))
            .stage("perturb")?
    } else {
        targets.clone()
    };
    Ok((targets, heatmaps))
}

/// Region selection and aggregation on the observed cloud.
pub fn run_aggregate(
    input: &PipelineInput,
    heatmaps: &HeatmapSet,
    cfg: &Config,
) -> Result<(Vec<RegionCenter>, Vec<Region>)> {
    let centers = select_centers(heatmaps, &input.depth, &input.intrinsics, &cfg.heatmap, &cfg.aggregation)
        .stage("select_centers")?;
    let cloud = depth_to_cloud(&input.depth, &input.intrinsics, cfg.pipeline.cloud_stride).stage("cloud")?;
    let regions = aggregate_regions(&cloud, &centers, &cfg.aggregation).stage("aggregate")?;
    Ok((centers, regions))
}

/// Teacher predictions, per-region decoding and NMS.
pub fn run_decode(
    input: &PipelineInput,
    regions: &[Region],
    anchors: &AnchorSet,
    cfg: &Config,
) -> Result<(Vec<RegionPrediction>, Vec<DecodedGrasp>)> {
    let d = &cfg.decode;
    let predictions = teacher_predictions(&input.labels, regions, anchors, &cfg.heatmap, d.exact_offsets)
        .stage("teacher")?;
    let mut decoded = Vec::new();
    for p in &predictions {
        decoded.extend(decode_region_traced(p, anchors, d.threshold, d.max_per_region).stage("decode")?);
    }
    let grasps: Vec<Grasp6D> = decoded.iter().map(|g| g.grasp).collect();
    let kept = nms_indices(&grasps, d.nms_translation, d.nms_rotation);
    Ok((predictions, kept.into_iter().map(|i| decoded[i]).collect()))
}

pub fn run_pipeline(input: &PipelineInput, cfg: &Config) -> Result<PipelineOutput> {
    cfg.validate().stage("config")?;
    let anchors = run_anchors(&input.labels, cfg).stage("anchors")?;
    let (targets, heatmaps) = run_encode(input, cfg)?;
    let (centers, regions) = run_aggregate(input, &heatmaps, cfg)?;
    let (predictions, decoded) = run_decode(input, &regions, &anchors, cfg)?;
    let grasps: Vec<Grasp6D> = decoded.iter().map(|g| g.grasp).collect();
    let report = evaluate(&grasps, &input.label_poses(), &input.eval_cloud, &cfg.scene.gripper, &cfg.eval)
        .stage("evaluate")?;
    let losses = if cfg.pipeline.losses {
        Some(heatmap_losses(&heatmaps, &targets, &cfg.losses).stage("losses")?)
    } else {
        None
    };
    Ok(PipelineOutput {
        anchors,
        targets,
        heatmaps,
        centers,
        regions,
        predictions,
        decoded,
        report,
        losses,
    })
}

/// Generates the configured scene and runs the pipeline on it.
pub fn run_synthetic(cfg: &Config) -> Result<(Scene, PipelineOutput)> {
    let scene = generate_scene(&cfg.scene).stage("synth")?;
    let input = PipelineInput::from_scene(&scene, cfg).stage("input")?;
    let out = run_pipeline(&input, cfg)?;
    Ok((scene, out))
}

/// Writes the maps of a set as `<prefix><name>.<ext>`.
pub fn write_heatmaps(dir: &Path, prefix: &str, set: &HeatmapSet, format: Format) -> Result<()> {
    let maps: [(&str, ArrayD<f64>); 5] = [
        ("confidence", set.confidence.clone().into_dyn()),
        ("theta", set.theta.clone().into_dyn()),
        ("theta_offset", set.theta_offset.clone().into_dyn()),
        ("width", set.width.clone().into_dyn()),
        ("depth", set.depth.clone().into_dyn()),
    ];
    for (name, a) in maps {
        if format == Format::Pfm && a.ndim() == 3 {
            // One file per anchor channel.
            for k in 0..a.shape()[2] {
                let ch = a.index_axis(ndarray::Axis(2), k).to_owned();
                write_array(&dir.join(format!("{prefix}{name}_{k}.pfm")), &ch, format)?;
            }
        } else {
            write_array(&dir.join(format!("{prefix}{name}.{}", format.extension())), &a, format)?;
        }
    }
    Ok(())
}

pub fn write_grasps(path: &Path, grasps: &[Grasp6D]) -> Result<()> {
    write_jsonl(path, grasps)
}

#[derive(Serialize)]
struct Summary<'a> {
    metrics: &'a MetricsReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    losses: Option<&'a LossReport>,
}

/// Dumps the config and every intermediate artifact into `dir`.
pub fn dump(out: &PipelineOutput, cfg: &Config, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    std::fs::write(dir.join("config.json"), cfg.to_json()?)?;
    let format = cfg.output.format;
    write_heatmaps(dir, "target_", &out.targets, format)?;
    if cfg.pipeline.heatmap_noise > 0.0 {
        write_heatmaps(dir, "pred_", &out.heatmaps, format)?;
    }
    write_json(&dir.join("anchors.json"), &out.anchors)?;
    write_json(&dir.join("centers.json"), &out.centers)?;
    write_json(&dir.join("regions.json"), &out.regions)?;
    write_json(&dir.join("predictions.json"), &out.predictions)?;
    write_grasps(&dir.join("grasps.jsonl"), &out.grasps())?;
    write_json(
        &dir.join("metrics.json"),
        &Summary {
            metrics: &out.report,
            losses: out.losses.as_ref(),
        },
    )?;
    std::fs::write(dir.join("curves.csv"), curves_csv(&out.report.curve))?;
    Ok(())
}
