//! Grasp representations, pinhole projection and rotation distance.
//!
//! Camera frame: x right, y down, z along the optical axis. The gripper
//! frame uses x as the approach axis, y as the jaw (closing) axis and z as
//! the finger-height axis. An image-plane grasp `(u, v, θ, w, d, γ, β)`
//! maps to a rotation
//!
//! ```text
//! R = Rz_cam(θ) · B · Ry(β) · Rz(γ)
//! ```
//!
//! where `B` is the base frame that points the approach axis along +z and
//! the jaw axis along +x of the camera, and `Ry`, `Rz` act about the
//! gripper's own jaw and height axes. With `θ = γ = β = 0` the gripper
//! looks straight down the optical axis with a horizontal jaw.
//!
//! The depth offset `d` is measured along the viewing ray through `(u, v)`:
//! the grasp center sits at depth `surface_z + d`, so `(u, v)` is always the
//! projection of the center itself.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::{Matrix3, Quaternion, Rotation3, Unit, UnitQuaternion, Vector3};
use ndarray::Array2;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-major depth image in meters; `dim() == (height, width)`.
pub type DepthMap = Array2<f64>;

const ANGLE_TOL: f64 = 1e-12;

/// Pinhole intrinsics with the image size they belong to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: u32,
    pub height: u32,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: u32, height: u32) -> Result<Self> {
        let intr = Self {
            fx,
            fy,
            cx,
            cy,
            width,
            height,
        };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(Error::InvalidIntrinsics(format!(
                "focal lengths must be positive (fx={}, fy={})",
                self.fx, self.fy
            )));
        }
        if !(self.cx >= 0.0 && self.cx < self.width as f64) {
            return Err(Error::InvalidIntrinsics(format!(
                "cx={} outside [0, {})",
                self.cx, self.width
            )));
        }
        if !(self.cy >= 0.0 && self.cy < self.height as f64) {
            return Err(Error::InvalidIntrinsics(format!(
                "cy={} outside [0, {})",
                self.cy, self.height
            )));
        }
        Ok(())
    }

    /// `(rows, cols)` of images taken with this camera.
    pub fn shape(&self) -> (usize, usize) {
        (self.height as usize, self.width as usize)
    }

    pub fn check_shape(&self, what: &str, shape: (usize, usize)) -> Result<()> {
        if shape != self.shape() {
            return Err(Error::Shape(format!(
                "{what} is {}x{} but the camera image is {}x{}",
                shape.0,
                shape.1,
                self.height,
                self.width
            )));
        }
        Ok(())
    }
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        Self {
            fx: 460.0,
            fy: 460.0,
            cx: 319.5,
            cy: 179.5,
            width: 640,
            height: 360,
        }
    }
}

/// Back-projects pixel `(u, v)` at depth `z` into the camera frame.
pub fn deproject(u: f64, v: f64, z: f64, intr: &CameraIntrinsics) -> Result<Vector3<f64>> {
    if !(z > 0.0) {
        return Err(Error::NonPositiveDepth(z));
    }
    Ok(Vector3::new(
        (u - intr.cx) * z / intr.fx,
        (v - intr.cy) * z / intr.fy,
        z,
    ))
}

/// Projects a camera-frame point to `(u, v, z)`.
pub fn project(p: &Vector3<f64>, intr: &CameraIntrinsics) -> Result<(f64, f64, f64)> {
    if !(p.z > 0.0) {
        return Err(Error::NonPositiveDepth(p.z));
    }
    Ok((
        intr.fx * p.x / p.z + intr.cx,
        intr.fy * p.y / p.z + intr.cy,
        p.z,
    ))
}

/// Image-plane grasp `(u, v, θ, w, d, γ, β)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Grasp2D5 {
    pub u: f64,
    pub v: f64,
    pub theta: f64,
    pub w: f64,
    pub d: f64,
    pub gamma: f64,
    pub beta: f64,
}

impl Grasp2D5 {
    pub fn validate(&self) -> Result<()> {
        if !(self.w > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grasp width must be positive, got {}",
                self.w
            )));
        }
        if !(self.theta >= -FRAC_PI_2 - ANGLE_TOL && self.theta < FRAC_PI_2) {
            return Err(Error::InvalidInput(format!(
                "theta {} outside [-pi/2, pi/2)",
                self.theta
            )));
        }
        for (name, a) in [("gamma", self.gamma), ("beta", self.beta)] {
            if !(a.abs() <= FRAC_PI_2 + ANGLE_TOL) {
                return Err(Error::InvalidInput(format!(
                    "{name} {a} outside [-pi/2, pi/2]"
                )));
            }
        }
        if !(self.u.is_finite() && self.v.is_finite() && self.d.is_finite()) {
            return Err(Error::InvalidInput("non-finite grasp coordinates".into()));
        }
        Ok(())
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        compose_rotation(self.theta, self.gamma, self.beta)
    }
}

/// Full SE(3) grasp in the camera frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Grasp6DRecord", into = "Grasp6DRecord")]
pub struct Grasp6D {
    pub t: Vector3<f64>,
    /// Scalar-first, canonicalized to a non-negative scalar part.
    pub q: UnitQuaternion<f64>,
    pub width: f64,
    pub score: f64,
}

impl Grasp6D {
    pub fn new(t: Vector3<f64>, rotation: &Rotation3<f64>, width: f64, score: f64) -> Self {
        Self {
            t,
            q: canonical_quaternion(UnitQuaternion::from_rotation_matrix(rotation)),
            width,
            score,
        }
    }

    pub fn rotation(&self) -> Rotation3<f64> {
        self.q.to_rotation_matrix()
    }

    pub fn approach(&self) -> Vector3<f64> {
        self.q * Vector3::x()
    }

    /// Closing direction of the jaws.
    pub fn jaw(&self) -> Vector3<f64> {
        self.q * Vector3::y()
    }

    /// `1 - |q1 · q2|` against another grasp.
    pub fn rotation_distance(&self, other: &Grasp6D) -> f64 {
        (1.0 - self.q.coords.dot(&other.q.coords).abs()).clamp(0.0, 1.0)
    }

    /// Maps a camera-frame point into this grasp's gripper frame.
    pub fn to_local(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.q.inverse_transform_vector(&(p - self.t))
    }
}

#[derive(Serialize, Deserialize)]
struct Grasp6DRecord {
    t: [f64; 3],
    q: [f64; 4],
    width: f64,
    #[serde(default = "default_score")]
    score: f64,
}

fn default_score() -> f64 {
    1.0
}

impl TryFrom<Grasp6DRecord> for Grasp6D {
    type Error = Error;

    fn try_from(r: Grasp6DRecord) -> Result<Self> {
        let q = Quaternion::new(r.q[0], r.q[1], r.q[2], r.q[3]);
        let n = q.norm();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::NotUnit(n));
        }
        if !(r.width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grasp width must be positive, got {}",
                r.width
            )));
        }
        Ok(Self {
            t: Vector3::from(r.t),
            q: canonical_quaternion(UnitQuaternion::from_quaternion(q)),
            width: r.width,
            score: r.score,
        })
    }
}

impl From<Grasp6D> for Grasp6DRecord {
    fn from(g: Grasp6D) -> Self {
        let q = g.q.quaternion();
        Self {
            t: [g.t.x, g.t.y, g.t.z],
            q: [q.w, q.i, q.j, q.k],
            width: g.width,
            score: g.score,
        }
    }
}

pub fn canonical_quaternion(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    if q.w < 0.0 {
        UnitQuaternion::new_unchecked(-q.into_inner())
    } else {
        q
    }
}

/// Parallel-jaw gripper dimensions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperSpec {
    /// Finger extent along the gripper height axis.
    pub height: f64,
    /// Finger extent along the approach axis (depth of the closing region).
    pub finger_depth: f64,
    pub finger_thickness: f64,
    pub max_width: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self {
            height: 0.02,
            finger_depth: 0.04,
            finger_thickness: 0.01,
            max_width: 0.085,
        }
    }
}

/// Axis-aligned box in the gripper frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalBox {
    pub center: Vector3<f64>,
    pub half: Vector3<f64>,
}

impl LocalBox {
    /// Strict interior test.
    #[inline]
    pub fn contains_strict(&self, p: &Vector3<f64>) -> bool {
        (p.x - self.center.x).abs() < self.half.x
            && (p.y - self.center.y).abs() < self.half.y
            && (p.z - self.center.z).abs() < self.half.z
    }

    #[inline]
    pub fn contains(&self, p: &Vector3<f64>) -> bool {
        (p.x - self.center.x).abs() <= self.half.x
            && (p.y - self.center.y).abs() <= self.half.y
            && (p.z - self.center.z).abs() <= self.half.z
    }

    /// The eight corners, in a fixed order.
    pub fn corners(&self) -> [Vector3<f64>; 8] {
        let mut out = [Vector3::zeros(); 8];
        for (i, c) in out.iter_mut().enumerate() {
            let sx = if i & 1 == 0 { -1.0 } else { 1.0 };
            let sy = if i & 2 == 0 { -1.0 } else { 1.0 };
            let sz = if i & 4 == 0 { -1.0 } else { 1.0 };
            *c = self.center
                + Vector3::new(sx * self.half.x, sy * self.half.y, sz * self.half.z);
        }
        out
    }
}

impl GripperSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.height > 0.0
            && self.finger_depth > 0.0
            && self.finger_thickness > 0.0
            && self.max_width > 0.0)
        {
            return Err(Error::InvalidInput(format!(
                "gripper dimensions must be positive: {self:?}"
            )));
        }
        Ok(())
    }

    /// Volume swept between the fingers for a jaw opening `width`.
    pub fn closing_region(&self, width: f64) -> LocalBox {
        LocalBox {
            center: Vector3::zeros(),
            half: Vector3::new(self.finger_depth / 2.0, width / 2.0, self.height / 2.0),
        }
    }

    /// Two fingers and the back plate.
    pub fn collision_boxes(&self, width: f64) -> [LocalBox; 3] {
        let t = self.finger_thickness;
        let half_finger = Vector3::new(self.finger_depth / 2.0, t / 2.0, self.height / 2.0);
        let offset = width / 2.0 + t / 2.0;
        [
            LocalBox {
                center: Vector3::new(0.0, offset, 0.0),
                half: half_finger,
            },
            LocalBox {
                center: Vector3::new(0.0, -offset, 0.0),
                half: half_finger,
            },
            LocalBox {
                center: Vector3::new(-self.finger_depth / 2.0 - t / 2.0, 0.0, 0.0),
                half: Vector3::new(t / 2.0, width / 2.0 + t, self.height / 2.0),
            },
        ]
    }

    /// Radius of a sphere about the grasp center enclosing every gripper box.
    pub fn bounding_radius(&self, width: f64) -> f64 {
        let t = self.finger_thickness;
        Vector3::new(self.finger_depth / 2.0 + t, width / 2.0 + t, self.height / 2.0).norm()
    }
}

fn rot_x(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::x_axis(), a)
}

fn rot_y(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::y_axis(), a)
}

fn rot_z(a: f64) -> Rotation3<f64> {
    Rotation3::from_axis_angle(&Vector3::z_axis(), a)
}

/// Gripper base frame: approach along camera +z, jaw along camera +x.
pub fn base_frame() -> Rotation3<f64> {
    Rotation3::from_matrix_unchecked(Matrix3::new(
        0.0, 1.0, 0.0, //
        0.0, 0.0, 1.0, //
        1.0, 0.0, 0.0,
    ))
}

/// Rotation of an image-plane grasp with angles `(θ, γ, β)`.
pub fn compose_rotation(theta: f64, gamma: f64, beta: f64) -> Rotation3<f64> {
    rot_z(theta) * base_frame() * rot_y(beta) * rot_z(gamma)
}

/// Euler angles recovered from a rotation, with the canonicalization applied.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EulerAngles {
    pub theta: f64,
    pub gamma: f64,
    pub beta: f64,
    /// `|β| = π/2`: `γ` was folded into `θ`.
    pub gimbal_locked: bool,
    /// The jaws were swapped (rotation by π about the approach axis) to
    /// bring `θ` into `[-π/2, π/2)`.
    pub jaw_swapped: bool,
}

/// Inverse of [`compose_rotation`] up to the gripper's jaw-swap symmetry.
///
/// Rotations whose approach axis points away from the camera have no
/// representation and are rejected.
pub fn decompose_rotation(r: &Rotation3<f64>) -> Result<EulerAngles> {
    // Undo the base frame: m = Rz(θ)·Rx(β)·Ry(γ) in camera axes.
    let m = r.matrix() * base_frame().matrix().transpose();
    let approach_z = m[(2, 2)];
    let cos_beta = m[(2, 0)].hypot(m[(2, 2)]);
    if approach_z < -1e-12 && cos_beta > 1e-9 {
        return Err(Error::Unrepresentable(format!(
            "approach axis points away from the camera (z component {approach_z:.3e})"
        )));
    }
    let beta = m[(2, 1)].atan2(cos_beta);
    let (raw_theta, gamma, gimbal_locked) = if cos_beta < 1e-9 {
        // m = Rz(θ ± γ)·Rx(±π/2); keep γ = 0 and read θ off the first column.
        (m[(1, 0)].atan2(m[(0, 0)]), 0.0, true)
    } else {
        (
            (-m[(0, 1)]).atan2(m[(1, 1)]),
            (-m[(2, 0)]).atan2(m[(2, 2)]),
            false,
        )
    };
    let (theta, gamma, beta, jaw_swapped) = if raw_theta >= FRAC_PI_2 {
        (raw_theta - PI, -gamma, -beta, true)
    } else if raw_theta < -FRAC_PI_2 {
        (raw_theta + PI, -gamma, -beta, true)
    } else {
        (raw_theta, gamma, beta, false)
    };
    // atan2 can land a hair outside the closed range at the boundary.
    Ok(EulerAngles {
        theta: if theta >= FRAC_PI_2 { -FRAC_PI_2 } else { theta.max(-FRAC_PI_2) },
        gamma: gamma.clamp(-FRAC_PI_2, FRAC_PI_2),
        beta: beta.clamp(-FRAC_PI_2, FRAC_PI_2),
        gimbal_locked,
        jaw_swapped,
    })
}

/// Rotation by π about the approach axis; maps a grasp onto itself.
pub fn jaw_swap() -> Rotation3<f64> {
    rot_x(PI)
}

/// Lifts an image-plane grasp to SE(3) given the observed surface depth at
/// `(u, v)`.
pub fn grasp_to_pose(g: &Grasp2D5, surface_z: f64, intr: &CameraIntrinsics) -> Result<Grasp6D> {
    g.validate()?;
    if !(surface_z > 0.0) {
        return Err(Error::NonPositiveDepth(surface_z));
    }
    let t = deproject(g.u, g.v, surface_z + g.d, intr)?;
    Ok(Grasp6D::new(t, &g.rotation(), g.w, 1.0))
}

/// Result of [`pose_to_grasp_checked`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoseProjection {
    pub grasp: Grasp2D5,
    pub gimbal_locked: bool,
    pub jaw_swapped: bool,
}

/// Projects a pose to an image-plane grasp whose surface point lies at
/// depth `surface_z` on the viewing ray through the grasp center.
pub fn pose_to_grasp_checked(
    p: &Grasp6D,
    surface_z: f64,
    intr: &CameraIntrinsics,
) -> Result<PoseProjection> {
    let (u, v, z) = project(&p.t, intr)?;
    if !(surface_z > 0.0) {
        return Err(Error::NonPositiveDepth(surface_z));
    }
    let e = decompose_rotation(&p.rotation())?;
    Ok(PoseProjection {
        grasp: Grasp2D5 {
            u,
            v,
            theta: e.theta,
            w: p.width,
            d: z - surface_z,
            gamma: e.gamma,
            beta: e.beta,
        },
        gimbal_locked: e.gimbal_locked,
        jaw_swapped: e.jaw_swapped,
    })
}

pub fn pose_to_grasp_on_surface(
    p: &Grasp6D,
    surface_z: f64,
    intr: &CameraIntrinsics,
) -> Result<Grasp2D5> {
    pose_to_grasp_checked(p, surface_z, intr).map(|r| r.grasp)
}

/// Projects a pose taking the grasp center itself as the surface point
/// (`d = 0`).
pub fn pose_to_grasp(p: &Grasp6D, intr: &CameraIntrinsics) -> Result<Grasp2D5> {
    pose_to_grasp_on_surface(p, p.t.z, intr)
}

/// `1 - |q1 · q2|` for unit quaternions.
pub fn rotation_distance(q1: &Quaternion<f64>, q2: &Quaternion<f64>) -> Result<f64> {
    for q in [q1, q2] {
        let n = q.norm();
        if (n - 1.0).abs() > 1e-6 {
            return Err(Error::NotUnit(n));
        }
    }
    Ok((1.0 - q1.coords.dot(&q2.coords).abs()).clamp(0.0, 1.0))
}

/// A ground-truth pose together with its image-plane encoding.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProjectedGrasp {
    /// Pose rebuilt from `grasp`, so the jaw-swap canonicalization is applied.
    pub pose: Grasp6D,
    pub grasp: Grasp2D5,
    /// Pixel `(row, col)` nearest to `(v, u)`.
    pub pixel: (usize, usize),
    /// Jaw opening in pixels at the center depth.
    pub width_px: f64,
}

impl ProjectedGrasp {
    /// Projects a camera-frame label against an observed depth map.
    pub fn from_pose(pose: &Grasp6D, depth: &DepthMap, intr: &CameraIntrinsics) -> Result<Self> {
        intr.check_shape("depth map", depth.dim())?;
        let (u, v, z) = project(&pose.t, intr)?;
        let (row, col) = (v.round(), u.round());
        if !(row >= 0.0 && col >= 0.0 && row < intr.height as f64 && col < intr.width as f64) {
            return Err(Error::InvalidInput(format!(
                "grasp center projects outside the image at ({u:.1}, {v:.1})"
            )));
        }
        let pixel = (row as usize, col as usize);
        let surface_z = depth[pixel];
        if !(surface_z.is_finite() && surface_z > 0.0) {
            return Err(Error::InvalidInput(format!(
                "no valid depth under grasp center at pixel {pixel:?}"
            )));
        }
        let grasp = pose_to_grasp_on_surface(pose, surface_z, intr)?;
        let mut canonical = grasp_to_pose(&grasp, surface_z, intr)?;
        canonical.score = pose.score;
        Ok(Self {
            pose: canonical,
            grasp,
            pixel,
            width_px: pose.width * intr.fx / z,
        })
    }
}

/// Rotation taking unit vector `from` onto unit vector `to`.
pub fn rotation_between(from: &Vector3<f64>, to: &Vector3<f64>) -> Rotation3<f64> {
    Rotation3::rotation_between(from, to).unwrap_or_else(|| {
        // Antiparallel: any perpendicular axis works.
        let axis = if from.x.abs() < 0.9 {
            from.cross(&Vector3::x())
        } else {
            from.cross(&Vector3::y())
        };
        Rotation3::from_axis_angle(&Unit::new_normalize(axis), PI)
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn intr() -> CameraIntrinsics {
        CameraIntrinsics::new(500.0, 500.0, 320.0, 180.0, 640, 360).unwrap()
    }

    #[test]
    fn deproject_principal_point() {
        let p = deproject(320.0, 180.0, 1.0, &intr()).unwrap();
        assert_eq!(p, Vector3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn deproject_by_hand() {
        let p = deproject(420.0, 280.0, 1.0, &intr()).unwrap();
        assert!((p - Vector3::new(0.2, 0.2, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn deproject_rejects_bad_depth() {
        assert!(matches!(
            deproject(1.0, 1.0, 0.0, &intr()),
            Err(Error::NonPositiveDepth(_))
        ));
        assert!(deproject(1.0, 1.0, -2.0, &intr()).is_err());
        assert!(deproject(1.0, 1.0, f64::NAN, &intr()).is_err());
    }

    #[test]
    fn intrinsics_validation() {
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 1.0, -0.1, 4, 4).is_err());
    }

    #[test]
    fn identity_angles_look_down_optical_axis() {
        let g = Grasp2D5 {
            u: 100.0,
            v: 50.0,
            theta: 0.0,
            w: 0.05,
            d: 0.0,
            gamma: 0.0,
            beta: 0.0,
        };
        let p = grasp_to_pose(&g, 0.8, &intr()).unwrap();
        assert!((p.approach() - Vector3::z()).norm() < 1e-12);
        assert!((p.jaw() - Vector3::x()).norm() < 1e-12);
        assert!((p.t - deproject(100.0, 50.0, 0.8, &intr()).unwrap()).norm() < 1e-15);
    }

    #[test]
    fn theta_rotates_jaw_about_optical_axis() {
        let r0 = compose_rotation(0.0, 0.0, 0.0);
        let r1 = compose_rotation(std::f64::consts::FRAC_PI_4, 0.0, 0.0);
        let jaw0 = r0 * Vector3::y();
        let jaw1 = r1 * Vector3::y();
        let s = std::f64::consts::FRAC_1_SQRT_2;
        assert!((jaw0 - Vector3::x()).norm() < 1e-12);
        assert!((jaw1 - Vector3::new(s, s, 0.0)).norm() < 1e-12);
        assert!((r1 * Vector3::x() - Vector3::z()).norm() < 1e-12);
    }

    #[test]
    fn gripper_axes_match_camera_axes_form() {
        // Rz(θ)·B·Ry(β)·Rz(γ) == Rz(θ)·Rx(β)·Ry(γ)·B in camera axes.
        for &(t, g, b) in &[(0.3, -0.2, 0.7), (-1.2, 1.1, -0.4), (0.0, 0.5, 0.5)] {
            let a = compose_rotation(t, g, b);
            let c = rot_z(t) * rot_x(b) * rot_y(g) * base_frame();
            assert!((a.matrix() - c.matrix()).norm() < 1e-12);
        }
    }

    #[test]
    fn identity_pose_projects_to_principal_point() {
        let p = Grasp6D::new(
            Vector3::new(0.0, 0.0, 1.0),
            &base_frame(),
            0.04,
            1.0,
        );
        let g = pose_to_grasp(&p, &intr()).unwrap();
        assert!((g.u - 320.0).abs() < 1e-12 && (g.v - 180.0).abs() < 1e-12);
        assert!(g.theta.abs() < 1e-12 && g.gamma.abs() < 1e-12 && g.beta.abs() < 1e-12);
        assert_eq!(g.d, 0.0);
    }

    #[test]
    fn out_of_range_theta_swaps_jaws() {
        let r = compose_rotation(2.0, 0.3, -0.4);
        let e = decompose_rotation(&r).unwrap();
        assert!(e.jaw_swapped);
        assert!(e.theta >= -FRAC_PI_2 && e.theta < FRAC_PI_2);
        let rebuilt = compose_rotation(e.theta, e.gamma, e.beta);
        let swapped = r * jaw_swap();
        assert!((rebuilt.matrix() - swapped.matrix()).norm() < 1e-9);
    }

    #[test]
    fn gimbal_lock_folds_gamma_into_theta() {
        for beta in [FRAC_PI_2, -FRAC_PI_2] {
            let r = compose_rotation(0.2, 0.3, beta);
            let e = decompose_rotation(&r).unwrap();
            assert!(e.gimbal_locked);
            assert_eq!(e.gamma, 0.0);
            let rebuilt = compose_rotation(e.theta, e.gamma, e.beta);
            let target = if e.jaw_swapped { r * jaw_swap() } else { r };
            assert!((rebuilt.matrix() - target.matrix()).norm() < 1e-9);
        }
    }

    #[test]
    fn approach_away_from_camera_is_rejected() {
        let r = Rotation3::from_axis_angle(&Vector3::y_axis(), PI) * base_frame();
        assert!(matches!(
            decompose_rotation(&r),
            Err(Error::Unrepresentable(_))
        ));
    }

    #[test]
    fn rotation_distance_examples() {
        let q = UnitQuaternion::from_euler_angles(0.1, 0.2, 0.3).into_inner();
        assert_eq!(rotation_distance(&q, &q).unwrap(), 0.0);
        let a = UnitQuaternion::identity().into_inner();
        let b = UnitQuaternion::from_axis_angle(&Vector3::z_axis(), PI).into_inner();
        assert!((rotation_distance(&a, &b).unwrap() - 1.0).abs() < 1e-12);
        let axis = Unit::new_normalize(Vector3::new(0.3, -1.0, 0.5));
        let c = UnitQuaternion::from_axis_angle(&axis, PI / 3.0).into_inner();
        let expected = 1.0 - (PI / 6.0).cos();
        assert!((rotation_distance(&a, &c).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 0.13397).abs() < 1e-5);
    }

    #[test]
    fn rotation_distance_rejects_non_unit() {
        let a = Quaternion::new(1.0, 0.0, 0.0, 0.0);
        let b = Quaternion::new(1.1, 0.0, 0.0, 0.0);
        assert!(matches!(rotation_distance(&a, &b), Err(Error::NotUnit(_))));
    }

    #[test]
    fn grasp6d_json_schema() {
        let g = Grasp6D::new(Vector3::new(0.1, 0.2, 0.3), &compose_rotation(0.2, 0.1, 0.0), 0.05, 0.7);
        let s = serde_json::to_string(&g).unwrap();
        let v: serde_json::Value = serde_json::from_str(&s).unwrap();
        assert_eq!(v["t"].as_array().unwrap().len(), 3);
        assert_eq!(v["q"].as_array().unwrap().len(), 4);
        assert!(v["q"][0].as_f64().unwrap() >= 0.0);
        let back: Grasp6D = serde_json::from_str(&s).unwrap();
        assert!((back.t - g.t).norm() < 1e-15);
        assert!(back.rotation_distance(&g) < 1e-12);
        let bad = r#"{"t":[0,0,1],"q":[2,0,0,0],"width":0.05,"score":1}"#;
        assert!(serde_json::from_str::<Grasp6D>(bad).is_err());
    }

    #[test]
    fn quaternion_is_canonical() {
        let r = compose_rotation(1.4, 1.2, -1.3);
        let g = Grasp6D::new(Vector3::z(), &r, 0.05, 1.0);
        assert!(g.q.w >= 0.0);
    }

    #[test]
    fn gripper_boxes_leave_closing_region_free() {
        let spec = GripperSpec::default();
        let closing = spec.closing_region(0.05);
        for b in spec.collision_boxes(0.05) {
            assert!(!closing.contains_strict(&b.center));
            for c in b.corners() {
                assert!(c.norm() <= spec.bounding_radius(0.05) + 1e-12);
            }
        }
    }

    proptest! {
        #[test]
        fn project_deproject_round_trip(u in 0.0f64..640.0, v in 0.0f64..360.0, z in 0.05f64..10.0) {
            let i = intr();
            let p = deproject(u, v, z, &i).unwrap();
            let (u2, v2, z2) = project(&p, &i).unwrap();
            prop_assert!((u - u2).abs() < 1e-9 && (v - v2).abs() < 1e-9 && (z - z2).abs() < 1e-12);
        }

        #[test]
        fn deproject_is_linear_in_depth(u in 0.0f64..640.0, v in 0.0f64..360.0, z in 0.05f64..5.0, k in 0.1f64..4.0) {
            let i = intr();
            let a = deproject(u, v, z, &i).unwrap() * k;
            let b = deproject(u, v, z * k, &i).unwrap();
            prop_assert!((a - b).norm() < 1e-9 * (1.0 + b.norm()));
        }

        #[test]
        fn grasp_pose_round_trip(
            u in 0.0f64..640.0, v in 0.0f64..360.0,
            theta in -FRAC_PI_2..FRAC_PI_2,
            gamma in -1.55f64..1.55, beta in -1.55f64..1.55,
            w in 0.01f64..0.085, d in -0.02f64..0.05, zs in 0.3f64..2.0,
        ) {
            let i = intr();
            let g = Grasp2D5 { u, v, theta, w, d, gamma, beta };
            let p = grasp_to_pose(&g, zs, &i).unwrap();
            let back = pose_to_grasp_on_surface(&p, zs, &i).unwrap();
            for (a, b) in [(g.u, back.u), (g.v, back.v), (g.theta, back.theta), (g.w, back.w),
                           (g.d, back.d), (g.gamma, back.gamma), (g.beta, back.beta)] {
                prop_assert!((a - b).abs() < 1e-6, "{:?} vs {:?}", g, back);
            }
            let p2 = grasp_to_pose(&back, zs, &i).unwrap();
            prop_assert!((p2.t - p.t).norm() < 1e-9);
            prop_assert!(p2.rotation_distance(&p) < 1e-9);
        }

        #[test]
        fn rotation_distance_sign_invariant(a in prop::array::uniform4(-1.0f64..1.0), b in prop::array::uniform4(-1.0f64..1.0)) {
            let qa = Quaternion::new(a[0], a[1], a[2], a[3]);
            let qb = Quaternion::new(b[0], b[1], b[2], b[3]);
            prop_assume!(qa.norm() > 0.1 && qb.norm() > 0.1);
            let qa = qa.normalize();
            let qb = qb.normalize();
            let d = rotation_distance(&qa, &qb).unwrap();
            prop_assert_eq!(d, rotation_distance(&(-qa), &qb).unwrap());
            prop_assert_eq!(d, rotation_distance(&qb, &qa).unwrap());
            prop_assert!((0.0..=1.0).contains(&d));
        }
    }
}
