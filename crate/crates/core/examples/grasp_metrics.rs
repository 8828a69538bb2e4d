//! Coverage, collision and antipodal scores for hand-placed grasps on a
//! single box.
//!
//! Run with `cargo run --example grasp_metrics`.

use graspmap::eval::{antipodal_score, collision_check, covers};
use graspmap::geometry::{compose_rotation, Grasp6D, GripperSpec};
use graspmap::scenegen::{Primitive, SceneObject};
use graspmap::pointops::PointCloud;
use nalgebra::{Isometry3, Vector3};

fn main() -> graspmap::Result<()> {
    let gripper = GripperSpec::default();
    let object = SceneObject {
        id: 1,
        shape: Primitive::Box { half: Vector3::new(0.02, 0.03, 0.025) },
        pose: Isometry3::translation(0.0, 0.0, 0.5),
    };
    let (points, normals): (Vec<_>, Vec<_>) = object.sample_surface(0.002).into_iter().unzip();
    let mut cloud = PointCloud::from_points(points);
    cloud.normals = Some(normals);

    // Camera-style frame: approach along +z, jaws along x or y.
    let across_x = Grasp6D::new(Vector3::new(0.0, 0.0, 0.49), &compose_rotation(0.0, 0.0, 0.0), 0.05, 1.0);
    let across_y = Grasp6D::new(
        Vector3::new(0.0, 0.0, 0.49),
        &compose_rotation(std::f64::consts::FRAC_PI_2 - 1e-9, 0.0, 0.0),
        0.05,
        1.0,
    );
    let too_narrow = Grasp6D::new(across_x.t, &across_x.rotation(), 0.03, 1.0);
    for (name, g) in [("across 4 cm side", across_x), ("across 6 cm side", across_y), ("too narrow", too_narrow)] {
        let a = antipodal_score(&g, &cloud, &gripper, 0.4)?;
        println!(
            "{name:16} collides {:5} antipodal {:.3} force closure {}",
            collision_check(&g, &cloud.points, &gripper),
            a.score,
            a.force_closure
        );
    }

    let nudged = Grasp6D::new(across_x.t + Vector3::new(0.019, 0.0, 0.0), &across_x.rotation(), 0.05, 1.0);
    let far = Grasp6D::new(across_x.t + Vector3::new(0.021, 0.0, 0.0), &across_x.rotation(), 0.05, 1.0);
    println!("1.9 cm away covers: {}", covers(&nudged, &across_x, 0.02, 0.1));
    println!("2.1 cm away covers: {}", covers(&far, &across_x, 0.02, 0.1));
    Ok(())
}
