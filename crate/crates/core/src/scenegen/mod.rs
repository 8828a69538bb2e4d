//! Synthetic tabletop scenes with analytic labels and a ray-cast renderer.
//!
//! The world frame has the table at `z = 0` with `z` up. Labels are
//! delivered in the camera frame.

mod labels;
mod primitives;
mod render;

pub use labels::{ground_truth_grasps, LabelParams};
pub use primitives::{Hit, Primitive, PrimitiveKind, SceneObject};
pub use render::{
    add_depth_noise, noise_field, render, render_depth, top_down_camera, Render, Table, NO_HIT,
};

use std::f64::consts::PI;

use nalgebra::{Isometry3, Unit, UnitQuaternion, Vector3};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::SceneIndex;
use crate::geometry::{CameraIntrinsics, DepthMap, Grasp6D, GripperSpec, ProjectedGrasp};
use crate::pointops::PointCloud;

/// Inclusive size ranges (m).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SizeRanges {
    pub box_side: (f64, f64),
    pub box_height: (f64, f64),
    pub cylinder_diameter: (f64, f64),
    pub cylinder_length: (f64, f64),
    pub sphere_diameter: (f64, f64),
}

impl Default for SizeRanges {
    fn default() -> Self {
        Self {
            box_side: (0.03, 0.10),
            box_height: (0.02, 0.10),
            cylinder_diameter: (0.03, 0.06),
            cylinder_length: (0.06, 0.16),
            sphere_diameter: (0.03, 0.06),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SceneSpec {
    pub min_objects: usize,
    pub max_objects: usize,
    pub palette: Vec<PrimitiveKind>,
    pub sizes: SizeRanges,
    /// Table extent along world x and y (m).
    pub table_extent: (f64, f64),
    pub seed: u64,
    /// Standard deviation of additive depth noise (m).
    pub noise_sigma: f64,
    pub camera_height: f64,
    /// Largest camera tilt away from top-down (rad).
    pub camera_tilt: f64,
    pub intrinsics: CameraIntrinsics,
    pub gripper: GripperSpec,
    pub labels: LabelParams,
    /// Minimum gap between object footprints (m).
    pub gap: f64,
    /// Labels whose approach makes a smaller cosine with the optical axis
    /// are dropped.
    pub min_approach_cos: f64,
    /// Surface sampling pitch for objects and table (m).
    pub object_step: f64,
    pub table_step: f64,
    pub max_attempts: usize,
}

impl Default for SceneSpec {
    fn default() -> Self {
        Self {
            min_objects: 6,
            max_objects: 8,
            palette: vec![PrimitiveKind::Box, PrimitiveKind::Cylinder, PrimitiveKind::Sphere],
            sizes: SizeRanges::default(),
            table_extent: (0.6, 0.45),
            seed: 0,
            noise_sigma: 0.0,
            camera_height: 0.65,
            camera_tilt: 0.0,
            intrinsics: CameraIntrinsics::default(),
            gripper: GripperSpec::default(),
            labels: LabelParams::default(),
            gap: 0.02,
            min_approach_cos: 0.25,
            object_step: 0.003,
            table_step: 0.005,
            max_attempts: 64,
        }
    }
}

fn check_range(name: &str, (lo, hi): (f64, f64)) -> Result<()> {
    if !(lo > 0.0 && lo <= hi && hi.is_finite()) {
        return Err(Error::InvalidInput(format!("size range {name} must satisfy 0 < lo <= hi, got ({lo}, {hi})")));
    }
    Ok(())
}

impl SceneSpec {
    pub fn validate(&self) -> Result<()> {
        if self.min_objects < 1 || self.min_objects > self.max_objects {
            return Err(Error::InvalidInput(format!(
                "object count range must satisfy 1 <= min <= max, got {}..={}",
                self.min_objects, self.max_objects
            )));
        }
        if self.palette.is_empty() {
            return Err(Error::InvalidInput("primitive palette is empty".into()));
        }
        let s = &self.sizes;
        for (name, r) in [
            ("box_side", s.box_side),
            ("box_height", s.box_height),
            ("cylinder_diameter", s.cylinder_diameter),
            ("cylinder_length", s.cylinder_length),
            ("sphere_diameter", s.sphere_diameter),
        ] {
            check_range(name, r)?;
        }
        self.gripper.validate()?;
        self.intrinsics.validate()?;
        let limit = self.gripper.max_width - self.labels.clearance;
        for kind in &self.palette {
            let smallest = match kind {
                PrimitiveKind::Box => s.box_side.0.min(s.box_height.0),
                PrimitiveKind::Cylinder => s.cylinder_diameter.0.min(s.cylinder_length.0),
                PrimitiveKind::Sphere => s.sphere_diameter.0,
            };
            if smallest > limit {
                return Err(Error::InvalidInput(format!(
                    "{kind:?} has no dimension that fits the gripper ({smallest} > {limit})"
                )));
            }
        }
        if !(self.table_extent.0 > 0.0 && self.table_extent.1 > 0.0) {
            return Err(Error::InvalidInput("table extent must be positive".into()));
        }
        if !(self.camera_height > 0.0) {
            return Err(Error::InvalidInput("camera must be above the table".into()));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidInput(format!("noise sigma must be >= 0, got {}", self.noise_sigma)));
        }
        if !(self.object_step > 0.0 && self.table_step > 0.0) {
            return Err(Error::InvalidInput("surface sampling steps must be positive".into()));
        }
        if self.max_attempts == 0 {
            return Err(Error::InvalidInput("max_attempts must be >= 1".into()));
        }
        Ok(())
    }
}

/// A camera-frame label and the object it grasps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SceneLabel {
    pub object: u16,
    pub grasp: ProjectedGrasp,
}

/// Scene geometry, the rendered view and its labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Scene {
    pub spec: SceneSpec,
    pub objects: Vec<SceneObject>,
    pub table: Table,
    /// Camera-to-world transform.
    pub camera: Isometry3<f64>,
    /// Noise-free render.
    pub depth_clean: DepthMap,
    /// Render with `spec.noise_sigma` noise applied.
    pub depth: DepthMap,
    pub ids: Array2<u16>,
    pub labels: Vec<SceneLabel>,
}

/// The serializable description of a scene, without rendered buffers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneDescription {
    pub spec: SceneSpec,
    pub objects: Vec<SceneObject>,
    pub table: Table,
    pub camera: Isometry3<f64>,
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo {
        rng.random_range(lo..=hi)
    } else {
        lo
    }
}

fn sample_shape(rng: &mut ChaCha8Rng, kind: PrimitiveKind, spec: &SceneSpec) -> Primitive {
    let s = &spec.sizes;
    let limit = spec.gripper.max_width - spec.labels.clearance;
    match kind {
        PrimitiveKind::Box => {
            // One horizontal side always fits between the jaws.
            let narrow = uniform(rng, (s.box_side.0, s.box_side.1.min(limit).max(s.box_side.0)));
            let other = uniform(rng, s.box_side);
            let h = uniform(rng, s.box_height);
            let (x, y) = if rng.random_bool(0.5) { (narrow, other) } else { (other, narrow) };
            Primitive::Box {
                half: Vector3::new(x, y, h) / 2.0,
            }
        }
        PrimitiveKind::Cylinder => Primitive::Cylinder {
            radius: uniform(rng, s.cylinder_diameter) / 2.0,
            half_length: uniform(rng, s.cylinder_length) / 2.0,
        },
        PrimitiveKind::Sphere => Primitive::Sphere {
            radius: uniform(rng, s.sphere_diameter) / 2.0,
        },
    }
}

const PLACEMENT_TRIES: usize = 200;

/// Rejection-samples non-overlapping footprints on the table.
fn place(rng: &mut ChaCha8Rng, spec: &SceneSpec) -> Option<Vec<SceneObject>> {
    let n = rng.random_range(spec.min_objects..=spec.max_objects);
    let (ex, ey) = spec.table_extent;
    let mut placed: Vec<(SceneObject, f64)> = Vec::with_capacity(n);
    for id in 1..=n {
        let kind = spec.palette[rng.random_range(0..spec.palette.len())];
        let shape = sample_shape(rng, kind, spec);
        let r = shape.footprint_radius();
        let (hx, hy) = (ex / 2.0 - r, ey / 2.0 - r);
        if hx < 0.0 || hy < 0.0 {
            return None;
        }
        let mut ok = None;
        for _ in 0..PLACEMENT_TRIES {
            let x = rng.random_range(-hx..=hx);
            let y = rng.random_range(-hy..=hy);
            let yaw = rng.random_range(-PI..PI);
            let clear = placed.iter().all(|(o, ro)| {
                let d = o.pose.translation.vector.xy() - nalgebra::Vector2::new(x, y);
                d.norm() >= r + ro + spec.gap
            });
            if clear {
                ok = Some(SceneObject {
                    id: id as u16,
                    shape,
                    pose: Isometry3::new(Vector3::new(x, y, shape.rest_height()), Vector3::z() * yaw),
                });
                break;
            }
        }
        placed.push((ok?, r));
    }
    Some(placed.into_iter().map(|(o, _)| o).collect())
}

fn sample_camera(rng: &mut ChaCha8Rng, spec: &SceneSpec) -> Isometry3<f64> {
    let base = top_down_camera(spec.camera_height);
    if spec.camera_tilt <= 0.0 {
        return base;
    }
    let tilt = rng.random_range(0.0..=spec.camera_tilt);
    let az = rng.random_range(-PI..PI);
    let axis = Unit::new_normalize(Vector3::new(az.cos(), az.sin(), 0.0));
    Isometry3::from_parts(Default::default(), UnitQuaternion::from_axis_angle(&axis, tilt)) * base
}

/// Seed of the unit noise field used for a scene.
pub fn noise_seed(scene_seed: u64) -> u64 {
    scene_seed ^ 0x9e37_79b9_7f4a_7c15
}

/// Surface samples of the objects and the table, world frame.
fn world_surface(objects: &[SceneObject], table: &Table, spec: &SceneSpec) -> Vec<(Vector3<f64>, Vector3<f64>)> {
    let mut out = Vec::new();
    for o in objects {
        out.extend(o.sample_surface(spec.object_step));
    }
    if let Some((ex, ey)) = table.extent {
        for x in primitives::grid_1d(ex, spec.table_step) {
            for y in primitives::grid_1d(ey, spec.table_step) {
                out.push((Vector3::new(x, y, 0.0), Vector3::z()));
            }
        }
    }
    out
}

fn to_camera_cloud(samples: &[(Vector3<f64>, Vector3<f64>)], camera: &Isometry3<f64>) -> PointCloud {
    let points = samples
        .iter()
        .map(|(p, _)| camera.inverse_transform_point(&(*p).into()).coords)
        .collect();
    let normals = samples
        .iter()
        .map(|(_, n)| camera.inverse_transform_vector(n))
        .collect();
    let mut cloud = PointCloud::from_points(points);
    cloud.normals = Some(normals);
    cloud
}

fn gripper_below_table(g_world: &Grasp6D, gripper: &GripperSpec) -> bool {
    let r = g_world.rotation();
    gripper
        .collision_boxes(g_world.width)
        .iter()
        .flat_map(|b| b.corners())
        .any(|c| (r * c + g_world.t).z < 0.0)
}

fn scene_labels(
    objects: &[SceneObject],
    camera: &Isometry3<f64>,
    clean: &Render,
    cloud: &PointCloud,
    spec: &SceneSpec,
) -> Result<Vec<SceneLabel>> {
    let index = SceneIndex::new(cloud)?;
    let cam_rot = camera.rotation.to_rotation_matrix();
    let intr = &spec.intrinsics;
    let mut out = Vec::new();
    for o in objects {
        for g in ground_truth_grasps(&o.shape, &o.pose, &spec.gripper, &spec.labels) {
            if gripper_below_table(&g, &spec.gripper) {
                continue;
            }
            let t = camera.inverse_transform_point(&g.t.into()).coords;
            let pose = Grasp6D::new(t, &(cam_rot.inverse() * g.rotation()), g.width, g.score);
            if pose.approach().z < spec.min_approach_cos || index.collides(&pose, &spec.gripper) {
                continue;
            }
            let Ok(pg) = ProjectedGrasp::from_pose(&pose, &clean.depth, intr) else {
                continue;
            };
            if clean.ids[pg.pixel] != o.id {
                continue;
            }
            out.push(SceneLabel {
                object: o.id,
                grasp: pg,
            });
        }
    }
    Ok(out)
}

/// Builds a scene: places primitives, renders the view and keeps labels
/// that are collision-free, face the camera and are visible on their object.
/// Attempts that leave an object without labels are discarded.
pub fn generate_scene(spec: &SceneSpec) -> Result<Scene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let table = Table {
        extent: Some(spec.table_extent),
    };
    for _ in 0..spec.max_attempts {
        let Some(objects) = place(&mut rng, spec) else {
            continue;
        };
        let camera = sample_camera(&mut rng, spec);
        let clean = render(&objects, &table, &spec.intrinsics, &camera);
        let cloud = to_camera_cloud(&world_surface(&objects, &table, spec), &camera);
        let labels = scene_labels(&objects, &camera, &clean, &cloud, spec)?;
        if objects.iter().any(|o| !labels.iter().any(|l| l.object == o.id)) {
            continue;
        }
        let depth = add_depth_noise(&clean.depth, spec.noise_sigma, noise_seed(spec.seed));
        return Ok(Scene {
            spec: spec.clone(),
            objects,
            table,
            camera,
            depth_clean: clean.depth,
            depth,
            ids: clean.ids,
            labels,
        });
    }
    Err(Error::Placement {
        seed: spec.seed,
        attempts: spec.max_attempts,
    })
}

impl Scene {
    pub fn intrinsics(&self) -> &CameraIntrinsics {
        &self.spec.intrinsics
    }

    /// Label poses in the camera frame.
    pub fn label_poses(&self) -> Vec<Grasp6D> {
        self.labels.iter().map(|l| l.grasp.pose).collect()
    }

    pub fn projected_labels(&self) -> Vec<ProjectedGrasp> {
        self.labels.iter().map(|l| l.grasp).collect()
    }

    /// Analytic surface samples of every object and the table, camera frame,
    /// with outward normals.
    pub fn surface_cloud(&self) -> PointCloud {
        to_camera_cloud(&world_surface(&self.objects, &self.table, &self.spec), &self.camera)
    }

    /// The same scene observed with a different noise level.
    pub fn with_noise(&self, sigma: f64) -> Scene {
        let mut out = self.clone();
        out.spec.noise_sigma = sigma;
        out.depth = add_depth_noise(&self.depth_clean, sigma, noise_seed(self.spec.seed));
        out
    }

    /// Distance from a camera-frame point to the nearest object surface or
    /// the table plane.
    pub fn surface_distance(&self, p_cam: &Vector3<f64>) -> f64 {
        let w = (self.camera * nalgebra::Point3::from(*p_cam)).coords;
        self.objects
            .iter()
            .map(|o| o.surface_distance(&w))
            .fold(w.z.abs(), f64::min)
    }

    pub fn description(&self) -> SceneDescription {
        SceneDescription {
            spec: self.spec.clone(),
            objects: self.objects.clone(),
            table: self.table,
            camera: self.camera,
        }
    }

    /// Re-renders a scene from its description; labels are regenerated.
    pub fn from_description(desc: &SceneDescription) -> Result<Scene> {
        let spec = &desc.spec;
        spec.validate()?;
        let clean = render(&desc.objects, &desc.table, &spec.intrinsics, &desc.camera);
        let cloud = to_camera_cloud(&world_surface(&desc.objects, &desc.table, spec), &desc.camera);
        let labels = scene_labels(&desc.objects, &desc.camera, &clean, &cloud, spec)?;
        let depth = add_depth_noise(&clean.depth, spec.noise_sigma, noise_seed(spec.seed));
        Ok(Scene {
            spec: spec.clone(),
            objects: desc.objects.clone(),
            table: desc.table,
            camera: desc.camera,
            depth_clean: clean.depth,
            depth,
            ids: clean.ids,
            labels,
        })
    }
}
