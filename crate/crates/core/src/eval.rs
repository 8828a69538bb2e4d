//! Grasp-set metrics: coverage rate, collision-free ratio, antipodal score
//! and their curves over top-k prefixes.

use std::fmt::Write as _;

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Grasp6D, GripperSpec};
use crate::pointops::{dist2, PointCloud, SpatialGrid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    /// Coverage translation threshold (m).
    pub trans_thresh: f64,
    /// Coverage rotation-distance threshold.
    pub rot_thresh: f64,
    /// Friction coefficient for the force-closure flag.
    pub mu: f64,
    /// Prefix sizes for the quality curves; empty means every prefix.
    pub curve_ks: Vec<usize>,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            trans_thresh: 0.02,
            rot_thresh: 0.1,
            mu: 0.4,
            curve_ks: Vec::new(),
        }
    }
}

/// Whether a prediction covers a label (both thresholds inclusive).
#[inline]
pub fn covers(pred: &Grasp6D, gt: &Grasp6D, trans_thresh: f64, rot_thresh: f64) -> bool {
    dist2(&pred.t, &gt.t) <= trans_thresh * trans_thresh
        && pred.rotation_distance(gt) <= rot_thresh
}

/// Fraction of labels covered by at least one prediction.
pub fn coverage_rate(pred: &[Grasp6D], gt: &[Grasp6D], trans_thresh: f64, rot_thresh: f64) -> Result<f64> {
    if gt.is_empty() {
        return Err(Error::InvalidInput("coverage needs at least one label".into()));
    }
    let covered = gt
        .iter()
        .filter(|g| pred.iter().any(|p| covers(p, g, trans_thresh, rot_thresh)))
        .count();
    Ok(covered as f64 / gt.len() as f64)
}

/// Per label, the index of the first prediction covering it.
pub fn first_cover(pred: &[Grasp6D], gt: &[Grasp6D], trans_thresh: f64, rot_thresh: f64) -> Vec<Option<usize>> {
    gt.iter()
        .map(|g| pred.iter().position(|p| covers(p, g, trans_thresh, rot_thresh)))
        .collect()
}

/// Whether any point lies strictly inside a finger or the back plate.
pub fn collision_check(g: &Grasp6D, points: &[Vector3<f64>], gripper: &GripperSpec) -> bool {
    let boxes = gripper.collision_boxes(g.width);
    let r2 = gripper.bounding_radius(g.width).powi(2);
    points.iter().any(|p| {
        dist2(p, &g.t) < r2 && {
            let l = g.to_local(p);
            boxes.iter().any(|b| b.contains_strict(&l))
        }
    })
}

/// Antipodal quality of one grasp.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Antipodal {
    /// `½(|n₁·ĉ| + |n₂·ĉ|)`.
    pub score: f64,
    /// Both contacts inside the friction cone.
    pub force_closure: bool,
    /// Indices of the two contact points.
    pub contacts: Option<(usize, usize)>,
}

impl Antipodal {
    const NONE: Antipodal = Antipodal {
        score: 0.0,
        force_closure: false,
        contacts: None,
    };
}

fn antipodal_from(
    g: &Grasp6D,
    cloud: &PointCloud,
    gripper: &GripperSpec,
    mu: f64,
    candidates: impl Iterator<Item = usize>,
) -> Result<Antipodal> {
    let normals = cloud
        .normals
        .as_ref()
        .ok_or_else(|| Error::InvalidInput("antipodal score needs normals".into()))?;
    let region = gripper.closing_region(g.width);
    // Contacts: extreme jaw coordinates among points in the closing region.
    let mut hi: Option<(f64, usize)> = None;
    let mut lo: Option<(f64, usize)> = None;
    let mut inside = 0usize;
    for i in candidates {
        let l = g.to_local(&cloud.points[i]);
        if !region.contains(&l) {
            continue;
        }
        inside += 1;
        if hi.is_none_or(|(y, _)| l.y > y) {
            hi = Some((l.y, i));
        }
        if lo.is_none_or(|(y, _)| l.y < y) {
            lo = Some((l.y, i));
        }
    }
    let (Some((_, a)), Some((_, b))) = (hi, lo) else {
        return Ok(Antipodal::NONE);
    };
    if inside < 2 || a == b {
        return Ok(Antipodal::NONE);
    }
    let c = g.jaw();
    let (s1, s2) = (normals[a].dot(&c).abs(), normals[b].dot(&c).abs());
    let cone = mu.atan().cos() - 1e-12;
    Ok(Antipodal {
        score: 0.5 * (s1 + s2),
        force_closure: s1 >= cone && s2 >= cone,
        contacts: Some((a, b)),
    })
}

/// Contact-normal alignment with the closing axis, with a friction-cone flag.
pub fn antipodal_score(g: &Grasp6D, cloud: &PointCloud, gripper: &GripperSpec, mu: f64) -> Result<Antipodal> {
    antipodal_from(g, cloud, gripper, mu, 0..cloud.len())
}

/// Spatial index over a scene cloud for repeated per-grasp checks.
pub struct SceneIndex<'a> {
    cloud: &'a PointCloud,
    grid: SpatialGrid,
}

impl<'a> SceneIndex<'a> {
    pub fn new(cloud: &'a PointCloud) -> Result<Self> {
        Ok(Self {
            cloud,
            grid: SpatialGrid::new(&cloud.points, 0.02)?,
        })
    }

    fn near(&self, g: &Grasp6D, gripper: &GripperSpec) -> Vec<usize> {
        let mut out = Vec::new();
        self.grid.ball_query_into(&g.t, gripper.bounding_radius(g.width), &mut out);
        out
    }

    /// Same result as [`collision_check`].
    pub fn collides(&self, g: &Grasp6D, gripper: &GripperSpec) -> bool {
        let boxes = gripper.collision_boxes(g.width);
        self.near(g, gripper).into_iter().any(|i| {
            let l = g.to_local(&self.cloud.points[i]);
            boxes.iter().any(|b| b.contains_strict(&l))
        })
    }

    /// Same result as [`antipodal_score`].
    pub fn antipodal(&self, g: &Grasp6D, gripper: &GripperSpec, mu: f64) -> Result<Antipodal> {
        antipodal_from(g, self.cloud, gripper, mu, self.near(g, gripper).into_iter())
    }
}

/// One row of the quality curves.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub k: usize,
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(rename = "CFR")]
    pub cfr: f64,
    #[serde(rename = "AS")]
    pub as_mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(rename = "CR")]
    pub cr: f64,
    #[serde(rename = "CFR")]
    pub cfr: f64,
    #[serde(rename = "AS")]
    pub as_mean: f64,
    pub num_pred: usize,
    pub num_gt: usize,
    /// Per label: covered by some prediction.
    pub covered: Vec<bool>,
    /// Per prediction: collides with the scene.
    pub collides: Vec<bool>,
    /// Per prediction: antipodal score.
    pub antipodal: Vec<f64>,
    /// Per prediction: force-closure flag.
    pub force_closure: Vec<bool>,
    pub curve: Vec<CurveRow>,
}

/// Per-prediction flags computed once and shared by the report and curves.
struct Flags {
    first_cover: Vec<Option<usize>>,
    collides: Vec<bool>,
    antipodal: Vec<Antipodal>,
}

fn flags(
    pred: &[Grasp6D],
    gt: &[Grasp6D],
    scene: &PointCloud,
    gripper: &GripperSpec,
    cfg: &EvalConfig,
) -> Result<Flags> {
    if gt.is_empty() {
        return Err(Error::InvalidInput("evaluation needs at least one label".into()));
    }
    let index = SceneIndex::new(scene)?;
    Ok(Flags {
        first_cover: first_cover(pred, gt, cfg.trans_thresh, cfg.rot_thresh),
        collides: pred.iter().map(|g| index.collides(g, gripper)).collect(),
        antipodal: pred
            .iter()
            .map(|g| index.antipodal(g, gripper, cfg.mu))
            .collect::<Result<_>>()?,
    })
}

fn curve_rows(f: &Flags, ks: &[usize]) -> Vec<CurveRow> {
    let n = f.collides.len();
    let mut free = vec![0usize; n + 1];
    let mut as_sum = vec![0.0; n + 1];
    for i in 0..n {
        free[i + 1] = free[i] + usize::from(!f.collides[i]);
        as_sum[i + 1] = as_sum[i] + f.antipodal[i].score;
    }
    let gt = f.first_cover.len() as f64;
    ks.iter()
        .map(|&k| {
            let k = k.min(n);
            let covered = f.first_cover.iter().filter(|c| c.is_some_and(|i| i < k)).count();
            CurveRow {
                k,
                cr: covered as f64 / gt,
                cfr: if k == 0 { 0.0 } else { free[k] as f64 / k as f64 },
                as_mean: if k == 0 { 0.0 } else { as_sum[k] / k as f64 },
            }
        })
        .collect()
}

/// Metrics over each top-`k` prefix of score-sorted predictions.
pub fn quality_curves(
    pred: &[Grasp6D],
    gt: &[Grasp6D],
    scene: &PointCloud,
    gripper: &GripperSpec,
    ks: &[usize],
    cfg: &EvalConfig,
) -> Result<Vec<CurveRow>> {
    Ok(curve_rows(&flags(pred, gt, scene, gripper, cfg)?, ks))
}

/// Full-set metrics, per-grasp flags and curves.
///
/// `scene` must carry normals for the antipodal score.
pub fn evaluate(
    pred: &[Grasp6D],
    gt: &[Grasp6D],
    scene: &PointCloud,
    gripper: &GripperSpec,
    cfg: &EvalConfig,
) -> Result<MetricsReport> {
    let f = flags(pred, gt, scene, gripper, cfg)?;
    let n = pred.len();
    let ks: Vec<usize> = if cfg.curve_ks.is_empty() {
        (1..=n).collect()
    } else {
        cfg.curve_ks.clone()
    };
    let full = curve_rows(&f, &[n])[0];
    Ok(MetricsReport {
        cr: full.cr,
        cfr: full.cfr,
        as_mean: full.as_mean,
        num_pred: n,
        num_gt: gt.len(),
        covered: f.first_cover.iter().map(Option::is_some).collect(),
        collides: f.collides.clone(),
        antipodal: f.antipodal.iter().map(|a| a.score).collect(),
        force_closure: f.antipodal.iter().map(|a| a.force_closure).collect(),
        curve: curve_rows(&f, &ks),
    })
}

/// CSV with header `k,CR,CFR,AS`.
pub fn curves_csv(rows: &[CurveRow]) -> String {
    let mut s = String::from("k,CR,CFR,AS\n");
    for r in rows {
        let _ = writeln!(s, "{},{},{},{}", r.k, r.cr, r.cfr, r.as_mean);
    }
    s
}

/// Parses [`curves_csv`] output.
pub fn parse_curves_csv(text: &str) -> Result<Vec<CurveRow>> {
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("k,CR,CFR,AS") {
        return Err(Error::Format("curves CSV must start with k,CR,CFR,AS".into()));
    }
    lines
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            let bad = || Error::Format(format!("bad curves row: {l}"));
            if f.len() != 4 {
                return Err(bad());
            }
            Ok(CurveRow {
                k: f[0].trim().parse().map_err(|_| bad())?,
                cr: f[1].trim().parse().map_err(|_| bad())?,
                cfr: f[2].trim().parse().map_err(|_| bad())?,
                as_mean: f[3].trim().parse().map_err(|_| bad())?,
            })
        })
        .collect()
}
