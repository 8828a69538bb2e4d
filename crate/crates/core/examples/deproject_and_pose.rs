//! Lift an image-plane grasp to a 6-DoF pose and project it back.
//!
//! Run with `cargo run --example deproject_and_pose`.

use graspmap::geometry::{
    decompose_rotation, deproject, grasp_to_pose, jaw_swap, pose_to_grasp_checked, project, CameraIntrinsics,
    Grasp2D5, Grasp6D,
};

fn main() -> graspmap::Result<()> {
    let intr = CameraIntrinsics::default();

    let p = deproject(400.0, 120.0, 0.6, &intr)?;
    let (u, v, z) = project(&p, &intr)?;
    println!("pixel (400, 120) at 0.6 m -> {:.4?} -> ({u:.3}, {v:.3}, {z:.3})", p);

    let g = Grasp2D5 {
        u: 320.0,
        v: 200.0,
        theta: 0.4,
        w: 0.05,
        d: 0.015,
        gamma: 0.2,
        beta: -0.3,
    };
    let surface_z = 0.58;
    let pose = grasp_to_pose(&g, surface_z, &intr)?;
    println!("pose: t = {:.4?}, approach = {:.4?}, jaw = {:.4?}", pose.t, pose.approach(), pose.jaw());

    let back = pose_to_grasp_checked(&pose, surface_z, &intr)?;
    println!("round trip: {:?} (jaw swapped: {})", back.grasp, back.jaw_swapped);

    // The same physical grasp with the fingers exchanged projects identically.
    let swapped = Grasp6D::new(pose.t, &(pose.rotation() * jaw_swap()), pose.width, 1.0);
    let e = decompose_rotation(&swapped.rotation())?;
    println!(
        "jaw-swapped pose -> theta {:.4}, gamma {:.4}, beta {:.4} (swapped: {})",
        e.theta, e.gamma, e.beta, e.jaw_swapped
    );
    Ok(())
}
