//! Brute-force oracles and scene helpers shared by the integration tests.

#![allow(dead_code)]

use graspmap::config::Config;
use graspmap::geometry::{Grasp6D, GripperSpec};
use graspmap::scenegen::{generate_scene, Scene};
use nalgebra::Vector3;
use rand::Rng;

pub fn d2(a: &Vector3<f64>, b: &Vector3<f64>) -> f64 {
    let dx = a.x - b.x;
    let dy = a.y - b.y;
    let dz = a.z - b.z;
    dx * dx + dy * dy + dz * dz
}

/// Textbook O(n·k) farthest point sampling, lowest index on ties.
pub fn fps_oracle(points: &[Vector3<f64>], n: usize, start: usize) -> Vec<usize> {
    let mut dist = vec![f64::INFINITY; points.len()];
    let mut taken = vec![false; points.len()];
    let mut out = Vec::with_capacity(n);
    let mut cur = start;
    for _ in 0..n {
        out.push(cur);
        taken[cur] = true;
        let mut best: Option<(f64, usize)> = None;
        for (i, p) in points.iter().enumerate() {
            let d = d2(p, &points[cur]);
            if d < dist[i] {
                dist[i] = d;
            }
            if !taken[i] && best.is_none_or(|(bd, _)| dist[i] > bd) {
                best = Some((dist[i], i));
            }
        }
        match best {
            Some((_, i)) => cur = i,
            None => break,
        }
    }
    out
}

pub fn ball_oracle(points: &[Vector3<f64>], c: &Vector3<f64>, r: f64) -> Vec<usize> {
    (0..points.len()).filter(|&i| d2(&points[i], c) <= r * r).collect()
}

pub fn knn_oracle(points: &[Vector3<f64>], q: &Vector3<f64>, k: usize) -> Vec<usize> {
    let mut all: Vec<(f64, usize)> = points.iter().enumerate().map(|(i, p)| (d2(p, q), i)).collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    all.into_iter().take(k).map(|(_, i)| i).collect()
}

/// A box in world coordinates described by its six face planes.
struct FaceBox {
    planes: [(Vector3<f64>, f64); 6],
}

impl FaceBox {
    /// Strictly on the inner side of every face.
    fn contains(&self, p: &Vector3<f64>) -> bool {
        self.planes.iter().all(|(n, o)| n.dot(p) < *o)
    }
}

fn face_box(g: &Grasp6D, center: Vector3<f64>, half: Vector3<f64>) -> FaceBox {
    let r = g.rotation();
    let m = r.matrix();
    let c = g.t + r * center;
    let mut planes = [(Vector3::zeros(), 0.0); 6];
    for a in 0..3 {
        let axis: Vector3<f64> = m.column(a).into();
        planes[2 * a] = (axis, axis.dot(&c) + half[a]);
        planes[2 * a + 1] = (-axis, -axis.dot(&c) + half[a]);
    }
    FaceBox { planes }
}

/// Collision test against the world-frame face planes of the two fingers
/// and the back plate.
pub fn collision_oracle(g: &Grasp6D, points: &[Vector3<f64>], gripper: &GripperSpec) -> bool {
    let t = gripper.finger_thickness;
    let (fd, h, w) = (gripper.finger_depth, gripper.height, g.width);
    let finger = Vector3::new(fd / 2.0, t / 2.0, h / 2.0);
    let boxes = [
        face_box(g, Vector3::new(0.0, w / 2.0 + t / 2.0, 0.0), finger),
        face_box(g, Vector3::new(0.0, -w / 2.0 - t / 2.0, 0.0), finger),
        face_box(
            g,
            Vector3::new(-fd / 2.0 - t / 2.0, 0.0, 0.0),
            Vector3::new(t / 2.0, w / 2.0 + t, h / 2.0),
        ),
    ];
    points.iter().any(|p| boxes.iter().any(|b| b.contains(p)))
}

/// Quaternion-free rotation distance: 1 − cos(angle/2) for the relative rotation.
pub fn rot_dist_oracle(a: &Grasp6D, b: &Grasp6D) -> f64 {
    let rel = a.rotation().inverse() * b.rotation();
    let tr = rel.matrix().trace();
    let c = ((tr - 1.0) / 2.0).clamp(-1.0, 1.0);
    1.0 - ((1.0 + c) / 2.0).sqrt()
}

pub fn coverage_oracle(pred: &[Grasp6D], gt: &[Grasp6D], dt: f64, dr: f64) -> f64 {
    let hit = gt
        .iter()
        .filter(|g| pred.iter().any(|p| (p.t - g.t).norm() <= dt && rot_dist_oracle(p, g) <= dr))
        .count();
    hit as f64 / gt.len() as f64
}

pub fn random_cloud<R: Rng>(rng: &mut R, n: usize) -> Vec<Vector3<f64>> {
    // Mix of uniform points and a coarse lattice so exact ties occur.
    let lattice = rng.random_bool(0.3);
    (0..n)
        .map(|_| {
            if lattice {
                Vector3::new(
                    rng.random_range(0..6) as f64 * 0.01,
                    rng.random_range(0..6) as f64 * 0.01,
                    rng.random_range(0..6) as f64 * 0.01,
                )
            } else {
                Vector3::new(
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                    rng.random_range(-0.1..0.1),
                )
            }
        })
        .collect()
}

pub fn scene_config(seed: u64) -> Config {
    let mut cfg = Config::default();
    cfg.scene.seed = seed;
    cfg
}

pub fn scenes(n: u64) -> Vec<(Config, Scene)> {
    (0..n)
        .map(|s| {
            let cfg = scene_config(s);
            let scene = generate_scene(&cfg.scene).expect("scene");
            (cfg, scene)
        })
        .collect()
}
