//! Ground-truth heatmap encoding.
//!
//! - `confidence`: full-resolution Gaussian peaks at grasp centers.
//! - `theta`: per grid cell and oriented anchor, squashed grasp counts.
//! - `theta_offset`: per cell and anchor, the mean residual to the anchor
//!   center in units of half the anchor pitch.
//! - `width`, `depth`: per cell, mean normalized grasp width and depth offset.

use std::f64::consts::{FRAC_PI_2, PI};

use ndarray::{Array2, Array3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grasp2D5, ProjectedGrasp};

/// Maps a grasp's pixel width to its Gaussian σ.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SigmaRule {
    /// σ = width_px / divisor.
    pub divisor: f64,
    /// Lower bound on σ in pixels.
    pub min_sigma: f64,
}

impl Default for SigmaRule {
    fn default() -> Self {
        Self {
            divisor: 4.0,
            min_sigma: 1.0,
        }
    }
}

impl SigmaRule {
    pub fn sigma(&self, width_px: f64) -> f64 {
        (width_px / self.divisor).max(self.min_sigma)
    }
}

/// Turns a per-anchor grasp count into a confidence target.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Squash {
    /// `c / (c + 1)`.
    Ratio,
    /// `min(c, 1)`.
    Indicator,
}

impl Squash {
    pub fn apply(self, count: f64) -> f64 {
        match self {
            Squash::Ratio => count / (count + 1.0),
            Squash::Indicator => count.min(1.0),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct HeatmapConfig {
    pub height: usize,
    pub width: usize,
    /// Grid cell side in pixels.
    pub grid: usize,
    /// Number of oriented θ anchors.
    pub k_a: usize,
    pub sigma_rule: SigmaRule,
    pub squash: Squash,
    pub w_norm: f64,
    pub d_norm: f64,
}

impl Default for HeatmapConfig {
    fn default() -> Self {
        Self {
            height: 360,
            width: 640,
            grid: 8,
            k_a: 6,
            sigma_rule: SigmaRule::default(),
            squash: Squash::Ratio,
            w_norm: 0.085,
            d_norm: 0.1,
        }
    }
}

impl HeatmapConfig {
    pub fn validate(&self) -> Result<()> {
        if self.grid == 0 || !self.height.is_multiple_of(self.grid) || !self.width.is_multiple_of(self.grid) {
            return Err(Error::InvalidInput(format!(
                "image {}x{} is not divisible into cells of {} px",
                self.height, self.width, self.grid
            )));
        }
        if self.k_a == 0 {
            return Err(Error::InvalidInput("k_a must be at least 1".into()));
        }
        if !(self.w_norm > 0.0 && self.d_norm > 0.0) {
            return Err(Error::InvalidInput("normalization scales must be positive".into()));
        }
        if !(self.sigma_rule.divisor > 0.0 && self.sigma_rule.min_sigma > 0.0) {
            return Err(Error::InvalidInput("sigma rule must be positive".into()));
        }
        Ok(())
    }

    /// `(H_r, W_r)`.
    pub fn grid_shape(&self) -> (usize, usize) {
        (self.height / self.grid, self.width / self.grid)
    }

    /// Uniform anchor centers over `[-π/2, π/2)`.
    pub fn theta_anchors(&self) -> Vec<f64> {
        let pitch = PI / self.k_a as f64;
        (0..self.k_a)
            .map(|i| -FRAC_PI_2 + pitch / 2.0 + i as f64 * pitch)
            .collect()
    }

    /// Half the anchor pitch, the offset normalization.
    pub fn theta_half_pitch(&self) -> f64 {
        PI / (2.0 * self.k_a as f64)
    }

    /// Nearest θ anchor, ties to the lower index.
    pub fn theta_bin(&self, theta: f64) -> usize {
        nearest_of(&self.theta_anchors(), theta)
    }
}

/// Index of the value in `anchors` nearest to `x`, ties to the lower index.
pub(crate) fn nearest_of(anchors: &[f64], x: f64) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, a) in anchors.iter().enumerate() {
        let d = (x - a).abs();
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// A grasp placed on the image with its pixel width.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelGrasp {
    pub grasp: Grasp2D5,
    pub width_px: f64,
}

impl From<&ProjectedGrasp> for PixelGrasp {
    fn from(p: &ProjectedGrasp) -> Self {
        Self {
            grasp: p.grasp,
            width_px: p.width_px,
        }
    }
}

impl PixelGrasp {
    fn pixel(&self, cfg: &HeatmapConfig) -> Result<(usize, usize)> {
        let (r, c) = (self.grasp.v.round(), self.grasp.u.round());
        if !(r >= 0.0 && c >= 0.0 && r < cfg.height as f64 && c < cfg.width as f64) {
            return Err(Error::InvalidInput(format!(
                "grasp center ({:.1}, {:.1}) outside the {}x{} image",
                self.grasp.u, self.grasp.v, cfg.width, cfg.height
            )));
        }
        Ok((r as usize, c as usize))
    }
}

/// The four ground-truth maps.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatmapSet {
    /// `H × W`.
    pub confidence: Array2<f64>,
    /// `H_r × W_r × k_a`.
    pub theta: Array3<f64>,
    /// `H_r × W_r × k_a`.
    pub theta_offset: Array3<f64>,
    /// `H_r × W_r`.
    pub width: Array2<f64>,
    /// `H_r × W_r`.
    pub depth: Array2<f64>,
}

/// Attributes read back from one grid cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CellAttributes {
    pub theta: f64,
    pub width: f64,
    pub depth_offset: f64,
}

impl HeatmapSet {
    pub fn check(&self, cfg: &HeatmapConfig) -> Result<()> {
        let (hr, wr) = cfg.grid_shape();
        let ok = self.confidence.dim() == (cfg.height, cfg.width)
            && self.theta.dim() == (hr, wr, cfg.k_a)
            && self.theta_offset.dim() == (hr, wr, cfg.k_a)
            && self.width.dim() == (hr, wr)
            && self.depth.dim() == (hr, wr);
        if ok {
            Ok(())
        } else {
            Err(Error::Shape(format!(
                "heatmaps do not match a {}x{} image with {} px cells and {} anchors",
                cfg.height, cfg.width, cfg.grid, cfg.k_a
            )))
        }
    }

    /// Cells that hold at least one grasp.
    pub fn occupancy(&self) -> Array2<bool> {
        let (hr, wr, _) = self.theta.dim();
        Array2::from_shape_fn((hr, wr), |(i, j)| {
            self.theta.slice(ndarray::s![i, j, ..]).iter().any(|&v| v > 0.0)
        })
    }

    /// Argmax anchor plus offset for θ; de-normalized width and depth offset.
    pub fn decode_cell(&self, i: usize, j: usize, cfg: &HeatmapConfig) -> CellAttributes {
        let row = self.theta.slice(ndarray::s![i, j, ..]);
        let mut best = 0;
        for (a, &v) in row.iter().enumerate() {
            if v > row[best] {
                best = a;
            }
        }
        let theta = cfg.theta_anchors()[best] + self.theta_offset[(i, j, best)] * cfg.theta_half_pitch();
        CellAttributes {
            theta: wrap_theta(theta),
            width: self.width[(i, j)] * cfg.w_norm,
            depth_offset: self.depth[(i, j)] * cfg.d_norm,
        }
    }
}

/// Folds an angle into `[-π/2, π/2)`.
pub fn wrap_theta(t: f64) -> f64 {
    let w = (t + FRAC_PI_2).rem_euclid(PI) - FRAC_PI_2;
    if w >= FRAC_PI_2 {
        -FRAC_PI_2
    } else {
        w
    }
}

/// Max-combined Gaussian peaks truncated at 3σ.
pub fn encode_confidence(grasps: &[PixelGrasp], cfg: &HeatmapConfig) -> Result<Array2<f64>> {
    cfg.validate()?;
    let mut q = Array2::zeros((cfg.height, cfg.width));
    for g in grasps {
        let (r0, c0) = g.pixel(cfg)?;
        let sigma = cfg.sigma_rule.sigma(g.width_px);
        if !sigma.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite σ for {:?}", g.grasp)));
        }
        let reach = (3.0 * sigma).floor() as i64;
        let cut2 = 9.0 * sigma * sigma;
        let inv = 1.0 / (2.0 * sigma * sigma);
        let (r0, c0) = (r0 as i64, c0 as i64);
        for r in (r0 - reach).max(0)..=(r0 + reach).min(cfg.height as i64 - 1) {
            for c in (c0 - reach).max(0)..=(c0 + reach).min(cfg.width as i64 - 1) {
                let d2 = ((r - r0).pow(2) + (c - c0).pow(2)) as f64;
                if d2 <= cut2 {
                    let v = (-d2 * inv).exp();
                    let cell = &mut q[(r as usize, c as usize)];
                    if v > *cell {
                        *cell = v;
                    }
                }
            }
        }
    }
    Ok(q)
}

/// Gridded θ counts, θ offsets, mean width and mean depth offset.
pub fn encode_attributes(
    grasps: &[PixelGrasp],
    cfg: &HeatmapConfig,
) -> Result<(Array3<f64>, Array3<f64>, Array2<f64>, Array2<f64>)> {
    cfg.validate()?;
    let (hr, wr) = cfg.grid_shape();
    let anchors = cfg.theta_anchors();
    let mut counts = Array3::<f64>::zeros((hr, wr, cfg.k_a));
    let mut offsets = Array3::<f64>::zeros((hr, wr, cfg.k_a));
    let mut n = Array2::<f64>::zeros((hr, wr));
    let mut w = Array2::<f64>::zeros((hr, wr));
    let mut d = Array2::<f64>::zeros((hr, wr));
    for g in grasps {
        let (r, c) = g.pixel(cfg)?;
        let (i, j) = (r / cfg.grid, c / cfg.grid);
        let b = nearest_of(&anchors, g.grasp.theta);
        counts[(i, j, b)] += 1.0;
        offsets[(i, j, b)] += (g.grasp.theta - anchors[b]) / cfg.theta_half_pitch();
        n[(i, j)] += 1.0;
        w[(i, j)] += g.grasp.w / cfg.w_norm;
        d[(i, j)] += g.grasp.d / cfg.d_norm;
    }
    for ((i, j, b), o) in offsets.indexed_iter_mut() {
        let c = counts[(i, j, b)];
        if c > 0.0 {
            *o /= c;
        }
    }
    for ((i, j), v) in w.indexed_iter_mut() {
        if n[(i, j)] > 0.0 {
            *v /= n[(i, j)];
            d[(i, j)] /= n[(i, j)];
        }
    }
    let theta = counts.mapv(|c| cfg.squash.apply(c));
    Ok((theta, offsets, w, d))
}

/// All four maps for a set of grasps.
pub fn encode(grasps: &[PixelGrasp], cfg: &HeatmapConfig) -> Result<HeatmapSet> {
    let confidence = encode_confidence(grasps, cfg)?;
    let (theta, theta_offset, width, depth) = encode_attributes(grasps, cfg)?;
    Ok(HeatmapSet {
        confidence,
        theta,
        theta_offset,
        width,
        depth,
    })
}

/// Bilinear reduction with half-pixel centers (align-corners false).
pub fn downsample_bilinear(map: &Array2<f64>, target: (usize, usize)) -> Result<Array2<f64>> {
    let (h, w) = map.dim();
    let (th, tw) = target;
    if th == 0 || tw == 0 || h % th != 0 || w % tw != 0 {
        return Err(Error::Shape(format!(
            "cannot downsample {h}x{w} to {th}x{tw}"
        )));
    }
    let sy = h as f64 / th as f64;
    let sx = w as f64 / tw as f64;
    let taps = |dst: usize, scale: f64, n: usize| {
        let src = ((dst as f64 + 0.5) * scale - 0.5).clamp(0.0, (n - 1) as f64);
        let i0 = src.floor() as usize;
        let i1 = (i0 + 1).min(n - 1);
        (i0, i1, src - i0 as f64)
    };
    Ok(Array2::from_shape_fn(target, |(i, j)| {
        let (y0, y1, fy) = taps(i, sy, h);
        let (x0, x1, fx) = taps(j, sx, w);
        let top = map[(y0, x0)] * (1.0 - fx) + map[(y0, x1)] * fx;
        let bottom = map[(y1, x0)] * (1.0 - fx) + map[(y1, x1)] * fx;
        top * (1.0 - fy) + bottom * fy
    }))
}

/// Adds seeded Gaussian noise to every map, keeping confidences in `[0, 1]`.
///
/// Stands in for an imperfect network prediction.
pub fn perturb_heatmaps(set: &HeatmapSet, sigma: f64, seed: u64) -> Result<HeatmapSet> {
    if !(sigma >= 0.0) {
        return Err(Error::InvalidInput(format!("noise sigma must be non-negative, got {sigma}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut noise = |x: f64| x + sigma * normal.sample(&mut rng);
    let confidence = set.confidence.mapv(|v| noise(v).clamp(0.0, 1.0));
    let theta = set.theta.mapv(|v| noise(v).clamp(0.0, 1.0));
    let theta_offset = set.theta_offset.mapv(|v| noise(v).clamp(-1.0, 1.0));
    let width = set.width.mapv(|v| noise(v).max(0.0));
    let depth = set.depth.mapv(&mut noise);
    Ok(HeatmapSet {
        confidence,
        theta,
        theta_offset,
        width,
        depth,
    })
}
