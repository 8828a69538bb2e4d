//! From per-region rotation-class scores to SE(3) grasps.
//!
//! A [`RegionPrediction`] carries one score and one center offset per
//! `(γ̃_i, β̃_j)` anchor pair, flattened as `i·k_r + j`, together with the
//! in-plane angle and width shared by the region's grasps.
//! [`teacher_predictions`] builds such predictions from labels, standing in
//! for a trained network.

use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

use crate::aggregation::Region;
use crate::anchors::AnchorSet;
use crate::error::{Error, Result};
use crate::geometry::{compose_rotation, Grasp6D, ProjectedGrasp};
use crate::heatmap::HeatmapConfig;
use crate::pointops::dist2;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// Classes scoring at least this are decoded.
    pub threshold: f64,
    pub max_per_region: usize,
    /// NMS translation threshold (m).
    pub nms_translation: f64,
    /// NMS rotation-distance threshold.
    pub nms_rotation: f64,
    /// Teacher center offsets are exact residuals rather than zero.
    pub exact_offsets: bool,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        Self {
            threshold: 0.5,
            max_per_region: 8,
            nms_translation: 0.02,
            nms_rotation: 0.1,
            exact_offsets: true,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidInput(format!(
                "threshold {} outside (0, 1)",
                self.threshold
            )));
        }
        if self.max_per_region == 0 {
            return Err(Error::InvalidInput("max_per_region must be at least 1".into()));
        }
        if !(self.nms_translation > 0.0 && self.nms_rotation > 0.0) {
            return Err(Error::InvalidInput("NMS thresholds must be positive".into()));
        }
        Ok(())
    }
}

/// Rotation-class scores and offsets for one region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionPrediction {
    /// Index of the region this prediction belongs to.
    pub region: usize,
    pub center: Vector3<f64>,
    /// `k_r²` scores in `[0, 1]`.
    pub class_scores: Vec<f64>,
    /// `k_r²` center offsets (m).
    pub offsets: Vec<Vector3<f64>>,
    pub theta: f64,
    pub width: f64,
    pub depth_offset: f64,
    /// Label behind each class, when known.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sources: Option<Vec<Option<usize>>>,
}

impl RegionPrediction {
    pub fn check(&self, anchors: &AnchorSet) -> Result<()> {
        let n = anchors.k_r() * anchors.k_r();
        if self.class_scores.len() != n || self.offsets.len() != n {
            return Err(Error::Shape(format!(
                "prediction has {} scores and {} offsets, expected {n}",
                self.class_scores.len(),
                self.offsets.len()
            )));
        }
        if let Some(s) = &self.sources {
            if s.len() != n {
                return Err(Error::Shape(format!("{} sources, expected {n}", s.len())));
            }
        }
        Ok(())
    }
}

/// A decoded grasp with its provenance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecodedGrasp {
    pub grasp: Grasp6D,
    pub region: usize,
    pub class: usize,
    pub source: Option<usize>,
}

/// Grasps for every class at or above `threshold`, best first, at most
/// `max_per_region`; the argmax class alone when none pass.
pub fn decode_region(
    pred: &RegionPrediction,
    anchors: &AnchorSet,
    threshold: f64,
    max_per_region: usize,
) -> Result<Vec<Grasp6D>> {
    Ok(decode_region_traced(pred, anchors, threshold, max_per_region)?
        .into_iter()
        .map(|d| d.grasp)
        .collect())
}

/// [`decode_region`] keeping the class and source label of each grasp.
pub fn decode_region_traced(
    pred: &RegionPrediction,
    anchors: &AnchorSet,
    threshold: f64,
    max_per_region: usize,
) -> Result<Vec<DecodedGrasp>> {
    pred.check(anchors)?;
    if max_per_region == 0 {
        return Err(Error::InvalidInput("max_per_region must be at least 1".into()));
    }
    let mut order: Vec<usize> = (0..pred.class_scores.len()).collect();
    order.sort_by(|&a, &b| pred.class_scores[b].total_cmp(&pred.class_scores[a]));
    let passing = order
        .iter()
        .take_while(|&&c| pred.class_scores[c] >= threshold)
        .count();
    let chosen = &order[..passing.clamp(1, max_per_region)];
    Ok(chosen
        .iter()
        .map(|&class| {
            let (gamma, beta) = anchors.class_angles(class);
            let rotation = compose_rotation(pred.theta, gamma, beta);
            DecodedGrasp {
                grasp: Grasp6D::new(
                    pred.center + pred.offsets[class],
                    &rotation,
                    pred.width,
                    pred.class_scores[class],
                ),
                region: pred.region,
                class,
                source: pred.sources.as_ref().and_then(|s| s[class]),
            }
        })
        .collect())
}

/// Indices kept by greedy NMS, in keep order.
///
/// Grasps are visited by descending score (stable); a grasp is dropped when
/// a kept one is within both `trans_thresh` and `rot_thresh` (inclusive).
pub fn nms_indices(grasps: &[Grasp6D], trans_thresh: f64, rot_thresh: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..grasps.len()).collect();
    order.sort_by(|&a, &b| grasps[b].score.total_cmp(&grasps[a].score));
    let t2 = trans_thresh * trans_thresh;
    let mut kept: Vec<usize> = Vec::new();
    for i in order {
        let g = &grasps[i];
        let suppressed = kept.iter().any(|&k| {
            let h = &grasps[k];
            dist2(&g.t, &h.t) <= t2 && g.rotation_distance(h) <= rot_thresh
        });
        if !suppressed {
            kept.push(i);
        }
    }
    kept
}

pub fn grasp_nms(grasps: &[Grasp6D], trans_thresh: f64, rot_thresh: f64) -> Vec<Grasp6D> {
    nms_indices(grasps, trans_thresh, rot_thresh)
        .into_iter()
        .map(|i| grasps[i])
        .collect()
}

/// Representatives closer than this in θ and width share a prediction.
const SAME_GRASP_TOL: f64 = 1e-9;

/// Oracle predictions from projected labels.
///
/// Each label whose center lies in a region's ball votes for its nearest
/// `(γ̃, β̃)` class. Within a region, votes are keyed by class and in-plane
/// anchor bin; each key is represented by the label nearest the region
/// center. Keys whose representatives share `(θ, width)` (to 1e-9) form one
/// prediction. Offsets are the representative's residual to the center when
/// `exact_offsets`, else zero. A region holding no labels yields one
/// all-zero prediction with the region's own angle and radius.
pub fn teacher_predictions(
    gt: &[ProjectedGrasp],
    regions: &[Region],
    anchors: &AnchorSet,
    hcfg: &HeatmapConfig,
    exact_offsets: bool,
) -> Result<Vec<RegionPrediction>> {
    let n = anchors.k_r() * anchors.k_r();
    let mut out = Vec::new();
    for (ri, region) in regions.iter().enumerate() {
        let c = &region.center;
        let r2 = c.radius * c.radius;
        // (θ bin, class) -> (distance², label index)
        let mut keys: Vec<((usize, usize), (f64, usize))> = Vec::new();
        for (li, label) in gt.iter().enumerate() {
            let d = dist2(&label.pose.t, &c.center);
            if d > r2 {
                continue;
            }
            let key = (
                hcfg.theta_bin(label.grasp.theta),
                anchors.class_of(label.grasp.gamma, label.grasp.beta),
            );
            match keys.iter_mut().find(|(k, _)| *k == key) {
                Some((_, best)) => {
                    if d < best.0 {
                        *best = (d, li);
                    }
                }
                None => keys.push((key, (d, li))),
            }
        }
        let blank = |theta: f64, width: f64| RegionPrediction {
            region: ri,
            center: c.center,
            class_scores: vec![0.0; n],
            offsets: vec![Vector3::zeros(); n],
            theta,
            width,
            depth_offset: c.depth_offset,
            sources: Some(vec![None; n]),
        };
        if keys.is_empty() {
            out.push(blank(c.theta, c.radius));
            continue;
        }
        keys.sort_by_key(|(k, _)| *k);
        let mut preds: Vec<RegionPrediction> = Vec::new();
        for ((_, class), (_, li)) in keys {
            let label = &gt[li];
            let (theta, width) = (label.grasp.theta, label.grasp.w);
            let idx = match preds
                .iter()
                .position(|p| {
                    (p.theta - theta).abs() <= SAME_GRASP_TOL
                        && (p.width - width).abs() <= SAME_GRASP_TOL
                        && p.class_scores[class] == 0.0
                })
            {
                Some(i) => i,
                None => {
                    preds.push(blank(theta, width));
                    preds.len() - 1
                }
            };
            let p = &mut preds[idx];
            p.class_scores[class] = 1.0;
            if exact_offsets {
                p.offsets[class] = label.pose.t - c.center;
            }
            p.sources.as_mut().expect("teacher sets sources")[class] = Some(li);
        }
        out.extend(preds);
    }
    Ok(out)
}
