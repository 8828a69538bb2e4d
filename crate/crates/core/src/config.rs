//! Run configuration: one JSON document whose fields override defaults.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::aggregation::AggregationConfig;
use crate::decode::DecodeConfig;
use crate::error::{Error, Result};
use crate::eval::EvalConfig;
use crate::heatmap::HeatmapConfig;
use crate::io::Format;
use crate::losses::LossConfig;
use crate::scenegen::SceneSpec;

/// Rotation anchor settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnchorConfig {
    pub k_r: usize,
    /// Buffer size that triggers a refit (`K`).
    pub flush_threshold: usize,
    /// Shift iterations per refit (`T`).
    pub iterations: usize,
    /// Fit the anchors to the scene's label angles before decoding.
    pub shift_on_labels: bool,
    pub fit_rounds: usize,
}

impl Default for AnchorConfig {
    fn default() -> Self {
        Self {
            k_r: 7,
            flush_threshold: 10_000,
            iterations: 1,
            shift_on_labels: true,
            fit_rounds: 10,
        }
    }
}

/// Which cloud the metrics are computed against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum EvalCloud {
    /// Analytic surface samples with exact normals, when the scene is known.
    #[default]
    Analytic,
    /// The observed depth cloud with estimated normals.
    Depth,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    /// Pixel stride when lifting the observed depth to a cloud.
    pub cloud_stride: usize,
    /// Standard deviation of noise added to the encoded maps.
    pub heatmap_noise: f64,
    pub eval_cloud: EvalCloud,
    /// Neighbours for normal estimation on depth clouds.
    pub normal_k: usize,
    /// Also score the driving maps against the encoded targets.
    pub losses: bool,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            cloud_stride: 2,
            heatmap_noise: 0.0,
            eval_cloud: EvalCloud::Analytic,
            normal_k: 16,
            losses: false,
        }
    }
}

/// Where artifacts go.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub format: Format,
    pub dump_dir: Option<PathBuf>,
    pub curves_out: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct Config {
    pub scene: SceneSpec,
    pub heatmap: HeatmapConfig,
    pub aggregation: AggregationConfig,
    pub anchors: AnchorConfig,
    pub decode: DecodeConfig,
    pub eval: EvalConfig,
    pub losses: LossConfig,
    pub pipeline: PipelineConfig,
    pub output: OutputConfig,
}

impl Config {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Config = crate::io::read_json(path)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn validate(&self) -> Result<()> {
        self.scene.validate()?;
        self.heatmap.validate()?;
        self.aggregation.validate()?;
        self.decode.validate()?;
        self.losses.validate()?;
        let (h, w) = self.scene.intrinsics.shape();
        if (self.heatmap.height, self.heatmap.width) != (h, w) {
            return Err(Error::InvalidInput(format!(
                "heatmap size {}x{} differs from the {}x{} camera image",
                self.heatmap.width, self.heatmap.height, w, h
            )));
        }
        if self.anchors.k_r == 0 {
            return Err(Error::InvalidInput("k_r must be >= 1".into()));
        }
        if self.pipeline.cloud_stride == 0 {
            return Err(Error::InvalidInput("cloud_stride must be >= 1".into()));
        }
        if !(self.pipeline.heatmap_noise >= 0.0) {
            return Err(Error::InvalidInput("heatmap_noise must be >= 0".into()));
        }
        Ok(())
    }
}
