//! Analytic antipodal grasp labels for single primitives.

use std::f64::consts::PI;

use nalgebra::{Isometry3, Matrix3, Rotation3, Unit, Vector3};
use serde::{Deserialize, Serialize};

use super::primitives::Primitive;
use crate::geometry::{Grasp6D, GripperSpec};

/// How labels are laid out on a primitive.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabelParams {
    /// Target spacing between grasp centers along a face (m).
    pub spacing: f64,
    /// Jaw opening beyond the object's extent (m).
    pub clearance: f64,
    /// Vertical margin above the table and the object top (m).
    pub margin: f64,
    /// Tilts of the approach axis about the jaw axis (rad).
    pub tilts: Vec<f64>,
    /// Jaw directions sampled around a sphere's vertical axis.
    pub sphere_yaws: usize,
}

impl Default for LabelParams {
    fn default() -> Self {
        Self {
            spacing: 0.03,
            clearance: 0.01,
            margin: 0.01,
            tilts: vec![0.0, PI / 6.0, -PI / 6.0],
            sphere_yaws: 4,
        }
    }
}

/// Offsets in `[-half_span, half_span]` about 0, at most `spacing` apart.
fn positions(half_span: f64, spacing: f64) -> Vec<f64> {
    if half_span <= 0.0 {
        return vec![0.0];
    }
    let n = (2.0 * half_span / spacing).floor() as usize + 1;
    if n == 1 {
        return vec![0.0];
    }
    let pitch = 2.0 * half_span / (n - 1) as f64;
    (0..n).map(|i| -half_span + i as f64 * pitch).collect()
}

fn frame(approach: &Vector3<f64>, jaw: &Vector3<f64>) -> Rotation3<f64> {
    let height = approach.cross(jaw);
    Rotation3::from_matrix_unchecked(Matrix3::from_columns(&[*approach, *jaw, height]))
}

/// Antipodal grasps on a primitive resting on the table under `pose`,
/// returned in the world frame with score 1.
///
/// Top-down approaches (tilted about the jaw axis) close across every
/// horizontal extent that fits the gripper; boxes also get side approaches
/// closing vertically.
pub fn ground_truth_grasps(
    shape: &Primitive,
    pose: &Isometry3<f64>,
    gripper: &GripperSpec,
    params: &LabelParams,
) -> Vec<Grasp6D> {
    let rest = shape.rest_height();
    let fd = gripper.finger_depth;
    let m = params.margin;
    // Grasp center height above the table: the back plate clears the top
    // and the fingertips clear the table.
    let z_c = (2.0 * rest - fd / 2.0 + m).max(fd / 2.0 + m) - rest;
    let down = -Vector3::z();
    let fits = |extent: f64| extent + params.clearance <= gripper.max_width;
    let half_h = gripper.height / 2.0;

    // (center, jaw, approach) in the local frame, before tilting.
    let mut top: Vec<(Vector3<f64>, Vector3<f64>, f64)> = Vec::new();
    let mut side: Vec<(Vector3<f64>, Vector3<f64>, Vector3<f64>, f64)> = Vec::new();
    match *shape {
        Primitive::Box { half } => {
            for (jaw_axis, along_axis) in [(0usize, 1usize), (1, 0)] {
                let extent = 2.0 * half[jaw_axis];
                if !fits(extent) {
                    continue;
                }
                for s in positions(half[along_axis] - half_h, params.spacing) {
                    let mut c = Vector3::new(0.0, 0.0, z_c);
                    c[along_axis] = s;
                    let mut jaw = Vector3::zeros();
                    jaw[jaw_axis] = 1.0;
                    top.push((c, jaw, extent));
                }
            }
            if fits(2.0 * half.z) {
                for a in [Vector3::x(), -Vector3::x(), Vector3::y(), -Vector3::y()] {
                    side.push((Vector3::zeros(), Vector3::z(), a, 2.0 * half.z));
                }
            }
        }
        Primitive::Cylinder {
            radius,
            half_length,
        } => {
            if fits(2.0 * radius) {
                for s in positions(half_length - half_h, params.spacing) {
                    top.push((Vector3::new(s, 0.0, z_c), Vector3::y(), 2.0 * radius));
                }
            }
            if fits(2.0 * half_length) {
                top.push((Vector3::new(0.0, 0.0, z_c), Vector3::x(), 2.0 * half_length));
            }
        }
        Primitive::Sphere { radius } => {
            if fits(2.0 * radius) {
                let n = params.sphere_yaws.max(1);
                for k in 0..n {
                    let a = PI * k as f64 / n as f64;
                    top.push((
                        Vector3::new(0.0, 0.0, z_c),
                        Vector3::new(a.cos(), a.sin(), 0.0),
                        2.0 * radius,
                    ));
                }
            }
        }
    }

    let mut out = Vec::new();
    let to_world = |c: &Vector3<f64>, r: Rotation3<f64>, extent: f64| {
        let t = pose * nalgebra::Point3::from(*c);
        let rot = pose.rotation.to_rotation_matrix() * r;
        Grasp6D::new(t.coords, &rot, extent + params.clearance, 1.0)
    };
    for (c, jaw, extent) in &top {
        for &tilt in &params.tilts {
            let tilt_rot = Rotation3::from_axis_angle(&Unit::new_normalize(*jaw), tilt);
            let approach = tilt_rot * down;
            out.push(to_world(c, frame(&approach, jaw), *extent));
        }
    }
    for (c, jaw, approach, extent) in &side {
        out.push(to_world(c, frame(approach, jaw), *extent));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::SceneIndex;
    use crate::pointops::PointCloud;
    use crate::scenegen::primitives::SceneObject;

    fn resting(shape: Primitive, yaw: f64) -> Isometry3<f64> {
        Isometry3::new(
            Vector3::new(0.01, -0.02, shape.rest_height()),
            Vector3::z() * yaw,
        )
    }

    fn cloud_of(obj: &SceneObject) -> PointCloud {
        let (p, n): (Vec<_>, Vec<_>) = obj.sample_surface(0.003).into_iter().unzip();
        let mut c = PointCloud::from_points(p);
        c.normals = Some(n);
        c
    }

    #[test]
    fn cube_gets_all_three_axes() {
        let shape = Primitive::Box {
            half: Vector3::repeat(0.02),
        };
        let g = ground_truth_grasps(&shape, &resting(shape, 0.0), &GripperSpec::default(), &LabelParams::default());
        let jaws: Vec<Vector3<f64>> = g.iter().map(|g| g.jaw()).collect();
        for axis in [Vector3::x(), Vector3::y(), Vector3::z()] {
            assert!(jaws.iter().any(|j| j.dot(&axis).abs() > 1.0 - 1e-12), "{axis:?}");
        }
    }

    #[test]
    fn oversized_sphere_is_empty() {
        let shape = Primitive::Sphere { radius: 0.05 };
        let g = ground_truth_grasps(&shape, &resting(shape, 0.0), &GripperSpec::default(), &LabelParams::default());
        assert!(g.is_empty());
    }

    #[test]
    fn top_labels_are_antipodal_and_collision_free() {
        let gripper = GripperSpec::default();
        for (shape, yaw) in [
            (
                Primitive::Box {
                    half: Vector3::new(0.03, 0.05, 0.04),
                },
                0.3,
            ),
            (
                Primitive::Box {
                    half: Vector3::new(0.02, 0.025, 0.01),
                },
                -1.0,
            ),
            (
                Primitive::Cylinder {
                    radius: 0.02,
                    half_length: 0.07,
                },
                0.7,
            ),
            (
                Primitive::Cylinder {
                    radius: 0.015,
                    half_length: 0.03,
                },
                2.0,
            ),
            (Primitive::Sphere { radius: 0.03 }, 0.0),
            (Primitive::Sphere { radius: 0.015 }, 0.0),
        ] {
            let obj = SceneObject {
                id: 1,
                shape,
                pose: resting(shape, yaw),
            };
            let cloud = cloud_of(&obj);
            let index = SceneIndex::new(&cloud).unwrap();
            let labels = ground_truth_grasps(&shape, &obj.pose, &gripper, &LabelParams::default());
            let top: Vec<_> = labels.iter().filter(|g| g.approach().z < -0.5).collect();
            assert!(!top.is_empty());
            for g in top {
                assert!(!index.collides(g, &gripper), "{shape:?}");
                let a = index.antipodal(g, &gripper, 0.4).unwrap();
                assert!(a.score > 0.95, "{shape:?} {}", a.score);
                // Gripper stays above the table.
                for b in gripper.collision_boxes(g.width) {
                    for c in b.corners() {
                        assert!((g.rotation() * c + g.t).z > 0.0);
                    }
                }
            }
        }
    }

    #[test]
    fn positions_are_symmetric() {
        assert_eq!(positions(-0.01, 0.03), vec![0.0]);
        assert_eq!(positions(0.01, 0.03), vec![0.0]);
        let p = positions(0.04, 0.03);
        assert_eq!(p.len(), 3);
        assert!((p[0] + 0.04).abs() < 1e-15 && p[1].abs() < 1e-15 && (p[2] - 0.04).abs() < 1e-15);
    }
}
