//! Analytic ray-cast depth rendering.

use nalgebra::{Isometry3, Vector3};
use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::primitives::SceneObject;
use crate::geometry::{CameraIntrinsics, DepthMap};

/// Horizontal table plane at world `z = 0`, centered on the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Table {
    /// Extent along world x and y; `None` for an unbounded plane.
    pub extent: Option<(f64, f64)>,
}

impl Table {
    pub fn contains_xy(&self, x: f64, y: f64) -> bool {
        match self.extent {
            None => true,
            Some((ex, ey)) => x.abs() <= ex / 2.0 && y.abs() <= ey / 2.0,
        }
    }
}

/// Per-pixel render outputs. ID 0 is the table, `u16::MAX` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct Render {
    pub depth: DepthMap,
    pub ids: Array2<u16>,
}

pub const NO_HIT: u16 = u16::MAX;

/// Camera looking straight down from `height` with image x along world x.
pub fn top_down_camera(height: f64) -> Isometry3<f64> {
    let rot = nalgebra::Rotation3::from_matrix_unchecked(nalgebra::Matrix3::new(
        1.0, 0.0, 0.0, //
        0.0, -1.0, 0.0, //
        0.0, 0.0, -1.0,
    ));
    Isometry3::from_parts(
        Vector3::new(0.0, 0.0, height).into(),
        nalgebra::UnitQuaternion::from_rotation_matrix(&rot),
    )
}

/// Nearest intersection along every pixel ray. `camera` maps camera to world.
pub fn render(
    objects: &[SceneObject],
    table: &Table,
    intr: &CameraIntrinsics,
    camera: &Isometry3<f64>,
) -> Render {
    let (h, w) = intr.shape();
    let mut depth = Array2::zeros((h, w));
    let mut ids = Array2::from_elem((h, w), NO_HIT);
    let origin = camera.translation.vector;
    let rot = camera.rotation.to_rotation_matrix();
    // Each pixel ray is `origin + s·dir` with `s` equal to camera depth.
    for r in 0..h {
        for c in 0..w {
            let d_cam = Vector3::new(
                (c as f64 - intr.cx) / intr.fx,
                (r as f64 - intr.cy) / intr.fy,
                1.0,
            );
            let dir = rot * d_cam;
            let mut best = f64::INFINITY;
            let mut id = NO_HIT;
            if dir.z < 0.0 {
                let s = -origin.z / dir.z;
                let p = origin + dir * s;
                if s > 0.0 && table.contains_xy(p.x, p.y) {
                    best = s;
                    id = 0;
                }
            }
            for o in objects {
                if let Some(hit) = o.intersect(&origin, &dir) {
                    if hit.s < best {
                        best = hit.s;
                        id = o.id;
                    }
                }
            }
            if id != NO_HIT {
                depth[[r, c]] = best;
                ids[[r, c]] = id;
            }
        }
    }
    Render { depth, ids }
}

/// Unit Gaussian field, fixed for a seed.
pub fn noise_field(shape: (usize, usize), seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn(shape, || StandardNormal.sample(&mut rng))
}

/// Adds `sigma` times the seeded unit field to valid pixels. Pixels pushed
/// to non-positive depth become invalid.
pub fn add_depth_noise(depth: &DepthMap, sigma: f64, seed: u64) -> DepthMap {
    if sigma <= 0.0 {
        return depth.clone();
    }
    let field = noise_field(depth.dim(), seed);
    let mut out = depth.clone();
    ndarray::Zip::from(&mut out).and(&field).for_each(|d, &n| {
        if *d > 0.0 {
            let v = *d + sigma * n;
            *d = if v > 0.0 { v } else { 0.0 };
        }
    });
    out
}

/// Rendered depth with optional additive Gaussian noise.
pub fn render_depth(
    objects: &[SceneObject],
    table: &Table,
    intr: &CameraIntrinsics,
    camera: &Isometry3<f64>,
    sigma: f64,
    seed: u64,
) -> DepthMap {
    add_depth_noise(&render(objects, table, intr, camera).depth, sigma, seed)
}
