//! Training losses as plain functions with closed-form gradients.
//!
//! All losses are means over their elements. Probabilities are clamped to
//! `[ε, 1 − ε]` with `ε = 1e-7` before taking logarithms; gradients are those
//! of the unclamped expressions evaluated at the clamped value.

use ndarray::{Array, Array2, Dimension, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::heatmap::HeatmapSet;

pub const EPS: f64 = 1e-7;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossConfig {
    /// Weight of the θ-anchor classification loss.
    pub a: f64,
    /// Weight of the attribute regression loss.
    pub b: f64,
    /// Weight of the center offset loss.
    pub c: f64,
    /// Focal exponent on the prediction.
    pub alpha: f64,
    /// Penalty-reduction exponent on the Gaussian target.
    pub beta: f64,
    /// Smooth-L1 transition point.
    pub delta: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        Self {
            a: 1.0,
            b: 1.0,
            c: 1.0,
            alpha: 2.0,
            beta: 4.0,
            delta: 1.0,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if [self.a, self.b, self.c, self.alpha, self.beta].iter().any(|v| !(*v >= 0.0)) {
            return Err(Error::InvalidInput("loss weights and exponents must be >= 0".into()));
        }
        if !(self.delta > 0.0) {
            return Err(Error::InvalidInput("smooth-L1 delta must be positive".into()));
        }
        Ok(())
    }
}

fn clamp_p(p: f64) -> f64 {
    p.clamp(EPS, 1.0 - EPS)
}

fn same_shape<D: Dimension>(a: &Array<f64, D>, b: &Array<f64, D>) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::Shape(format!(
            "shapes {:?} and {:?} differ",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

fn mean_of(sum: f64, n: usize) -> f64 {
    if n == 0 {
        0.0
    } else {
        sum / n as f64
    }
}

/// `x^e`, exact repeated multiplication for small integral exponents.
#[inline]
fn pow(x: f64, e: f64) -> f64 {
    if e.fract() == 0.0 && e.abs() <= 16.0 {
        x.powi(e as i32)
    } else {
        x.powf(e)
    }
}

/// Penalty-reduced focal term for one pixel.
#[inline]
fn focal_loss_px(p: f64, t: f64, alpha: f64, beta: f64) -> f64 {
    let p = clamp_p(p);
    if t >= 1.0 {
        -pow(1.0 - p, alpha) * p.ln()
    } else {
        -pow(1.0 - t, beta) * pow(p, alpha) * (1.0 - p).ln()
    }
}

/// Derivative of [`focal_loss_px`] in `p`.
#[inline]
fn focal_grad_px(p: f64, t: f64, alpha: f64, beta: f64) -> f64 {
    let p = clamp_p(p);
    if t >= 1.0 {
        let q = 1.0 - p;
        alpha * pow(q, alpha - 1.0) * p.ln() - pow(q, alpha) / p
    } else {
        let w = pow(1.0 - t, beta);
        let l = (1.0 - p).ln();
        -w * (alpha * pow(p, alpha - 1.0) * l - pow(p, alpha) / (1.0 - p))
    }
}

/// Mean penalty-reduced focal loss of predicted confidences against a
/// Gaussian-encoded target (pixels equal to 1 are positives).
pub fn confidence_focal<D: Dimension>(
    pred: &Array<f64, D>,
    target: &Array<f64, D>,
    alpha: f64,
    beta: f64,
) -> Result<f64> {
    same_shape(pred, target)?;
    let mut sum = 0.0;
    Zip::from(pred).and(target).for_each(|&p, &t| sum += focal_loss_px(p, t, alpha, beta));
    Ok(mean_of(sum, pred.len()))
}

/// Gradient of [`confidence_focal`] with respect to `pred`.
pub fn confidence_focal_grad<D: Dimension>(
    pred: &Array<f64, D>,
    target: &Array<f64, D>,
    alpha: f64,
    beta: f64,
) -> Result<Array<f64, D>> {
    same_shape(pred, target)?;
    let n = pred.len().max(1) as f64;
    Ok(Zip::from(pred)
        .and(target)
        .map_collect(|&p, &t| focal_grad_px(p, t, alpha, beta) / n))
}

fn smooth_l1(x: f64, delta: f64) -> (f64, f64) {
    if x.abs() < delta {
        (0.5 * x * x / delta, x / delta)
    } else {
        (x.abs() - 0.5 * delta, x.signum())
    }
}

/// Mean smooth-L1 over elements where `mask` is set; zero for an empty mask.
pub fn masked_smooth_l1<D: Dimension>(
    pred: &Array<f64, D>,
    target: &Array<f64, D>,
    mask: &Array<bool, D>,
    delta: f64,
) -> Result<f64> {
    same_shape(pred, target)?;
    if mask.shape() != pred.shape() {
        return Err(Error::Shape("mask shape differs from prediction".into()));
    }
    let (mut sum, mut n) = (0.0, 0);
    Zip::from(pred).and(target).and(mask).for_each(|&p, &t, &m| {
        if m {
            sum += smooth_l1(p - t, delta).0;
            n += 1;
        }
    });
    Ok(mean_of(sum, n))
}

/// Gradient of [`masked_smooth_l1`] with respect to `pred`.
pub fn masked_smooth_l1_grad<D: Dimension>(
    pred: &Array<f64, D>,
    target: &Array<f64, D>,
    mask: &Array<bool, D>,
    delta: f64,
) -> Result<Array<f64, D>> {
    same_shape(pred, target)?;
    if mask.shape() != pred.shape() {
        return Err(Error::Shape("mask shape differs from prediction".into()));
    }
    let n = mask.iter().filter(|&&m| m).count().max(1) as f64;
    Ok(Zip::from(pred)
        .and(target)
        .and(mask)
        .map_collect(|&p, &t, &m| if m { smooth_l1(p - t, delta).1 / n } else { 0.0 }))
}

fn binary_focal(p: f64, t: f64, alpha: f64) -> (f64, f64) {
    let p = clamp_p(p);
    let q = 1.0 - p;
    let loss = -t * pow(q, alpha) * p.ln() - (1.0 - t) * pow(p, alpha) * q.ln();
    let grad = t * (alpha * pow(q, alpha - 1.0) * p.ln() - pow(q, alpha) / p)
        - (1.0 - t) * (alpha * pow(p, alpha - 1.0) * q.ln() - pow(p, alpha) / q);
    (loss, grad)
}

/// Mean focal binary cross-entropy over classes.
pub fn multilabel_focal(scores: &[f64], targets: &[f64], alpha: f64) -> Result<f64> {
    if scores.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} targets",
            scores.len(),
            targets.len()
        )));
    }
    let sum: f64 = scores
        .iter()
        .zip(targets)
        .map(|(&p, &t)| binary_focal(p, t, alpha).0)
        .sum();
    Ok(mean_of(sum, scores.len()))
}

/// Gradient of [`multilabel_focal`] with respect to `scores`.
pub fn multilabel_focal_grad(scores: &[f64], targets: &[f64], alpha: f64) -> Result<Vec<f64>> {
    if scores.len() != targets.len() {
        return Err(Error::Shape(format!(
            "{} scores for {} targets",
            scores.len(),
            targets.len()
        )));
    }
    let n = scores.len().max(1) as f64;
    Ok(scores
        .iter()
        .zip(targets)
        .map(|(&p, &t)| binary_focal(p, t, alpha).1 / n)
        .collect())
}

/// The five loss terms.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct LossParts {
    /// Confidence heatmap.
    pub confidence: f64,
    /// θ-anchor classification.
    pub cls: f64,
    /// Width, depth and θ-offset regression.
    pub reg: f64,
    /// Rotation-anchor classification.
    pub anchor: f64,
    /// Center offset regression.
    pub offset: f64,
}

/// `L_c + a·L_cls + b·L_reg + L_anchor + c·L_offset`.
pub fn total_loss(parts: &LossParts, cfg: &LossConfig) -> f64 {
    parts.confidence + cfg.a * parts.cls + cfg.b * parts.reg + parts.anchor + cfg.c * parts.offset
}

/// Loss terms with their weighted total.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossReport {
    pub parts: LossParts,
    pub total: f64,
}

/// Heatmap terms of predicted maps against encoded targets.
///
/// Regression terms are masked to cells holding a grasp; the anchor and
/// offset terms are left at zero.
pub fn heatmap_losses(pred: &HeatmapSet, target: &HeatmapSet, cfg: &LossConfig) -> Result<LossReport> {
    cfg.validate()?;
    let confidence = confidence_focal(&pred.confidence, &target.confidence, cfg.alpha, cfg.beta)?;
    same_shape(&pred.theta, &target.theta)?;
    let cls = multilabel_focal(
        pred.theta.as_standard_layout().as_slice().expect("standard layout"),
        target.theta.as_standard_layout().as_slice().expect("standard layout"),
        cfg.alpha,
    )?;
    let occupied: Array2<bool> = target.occupancy();
    let offset_mask = target.theta.mapv(|v| v > 0.0);
    let reg = (masked_smooth_l1(&pred.width, &target.width, &occupied, cfg.delta)?
        + masked_smooth_l1(&pred.depth, &target.depth, &occupied, cfg.delta)?
        + masked_smooth_l1(&pred.theta_offset, &target.theta_offset, &offset_mask, cfg.delta)?)
        / 3.0;
    let parts = LossParts {
        confidence,
        cls,
        reg,
        anchor: 0.0,
        offset: 0.0,
    };
    Ok(LossReport {
        parts,
        total: total_loss(&parts, cfg),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{arr1, Array1};

    #[test]
    fn focal_closed_form() {
        let l = confidence_focal(&arr1(&[0.5]), &arr1(&[1.0]), 2.0, 4.0).unwrap();
        assert!((l - 0.25 * 2f64.ln()).abs() < 1e-12);
        assert!((l - 0.17329).abs() < 1e-5);
        let m = multilabel_focal(&[0.5], &[1.0], 2.0).unwrap();
        assert!((m - 0.25 * 2f64.ln()).abs() < 1e-12);
    }

    #[test]
    fn perfect_predictions_are_near_zero() {
        let t = arr1(&[1.0, 0.0, 0.0, 1.0]);
        assert!(confidence_focal(&t, &t, 2.0, 4.0).unwrap() < 1e-12);
        assert!(multilabel_focal(&[1.0, 0.0], &[1.0, 0.0], 2.0).unwrap() < 1e-12);
        let m = Array1::from_elem(4, true);
        assert_eq!(masked_smooth_l1(&t, &t, &m, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn focal_falls_as_prediction_approaches_target() {
        let t = arr1(&[1.0]);
        let mut prev = f64::INFINITY;
        for k in 1..100 {
            let l = confidence_focal(&arr1(&[k as f64 / 100.0]), &t, 2.0, 4.0).unwrap();
            assert!(l < prev);
            prev = l;
        }
        let t = arr1(&[0.3]);
        let mut prev = f64::INFINITY;
        for k in (0..99).rev() {
            let l = confidence_focal(&arr1(&[k as f64 / 100.0]), &t, 2.0, 4.0).unwrap();
            assert!(l <= prev);
            prev = l;
        }
    }

    #[test]
    fn smooth_l1_branches() {
        let m = arr1(&[true]);
        assert!((masked_smooth_l1(&arr1(&[0.5]), &arr1(&[0.0]), &m, 1.0).unwrap() - 0.125).abs() < 1e-15);
        assert!((masked_smooth_l1(&arr1(&[2.0]), &arr1(&[0.0]), &m, 1.0).unwrap() - 1.5).abs() < 1e-15);
        let none = arr1(&[false]);
        assert_eq!(masked_smooth_l1(&arr1(&[2.0]), &arr1(&[0.0]), &none, 1.0).unwrap(), 0.0);
    }

    #[test]
    fn multilabel_is_permutation_invariant() {
        let s = [0.2, 0.9, 0.4];
        let t = [0.0, 1.0, 1.0];
        let a = multilabel_focal(&s, &t, 2.0).unwrap();
        let b = multilabel_focal(&[0.4, 0.2, 0.9], &[1.0, 0.0, 1.0], 2.0).unwrap();
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn total_is_weighted_sum() {
        let cfg = LossConfig::default();
        assert_eq!(total_loss(&LossParts::default(), &cfg), 0.0);
        let ones = LossParts {
            confidence: 1.0,
            cls: 1.0,
            reg: 1.0,
            anchor: 1.0,
            offset: 1.0,
        };
        assert_eq!(total_loss(&ones, &cfg), 5.0);
        let w = LossConfig {
            a: 2.0,
            b: 3.0,
            c: 4.0,
            ..cfg
        };
        assert_eq!(total_loss(&ones, &w), 11.0);
    }

    #[test]
    fn gradients_match_finite_differences_spot_check() {
        let p = arr1(&[0.3, 0.7, 0.55]);
        let t = arr1(&[1.0, 0.2, 0.0]);
        let g = confidence_focal_grad(&p, &t, 2.0, 4.0).unwrap();
        let h = 1e-5;
        for i in 0..3 {
            let mut up = p.clone();
            let mut dn = p.clone();
            up[i] += h;
            dn[i] -= h;
            let fd = (confidence_focal(&up, &t, 2.0, 4.0).unwrap()
                - confidence_focal(&dn, &t, 2.0, 4.0).unwrap())
                / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * fd.abs().max(1e-8));
        }
    }
}
