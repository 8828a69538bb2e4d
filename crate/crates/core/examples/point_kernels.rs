//! Farthest point sampling, ball queries, nearest neighbours and normals.
//!
//! Run with `cargo run --release --example point_kernels`.

use std::time::Instant;

use graspmap::pointops::{
    ball_query, depth_to_cloud, estimate_normals, farthest_point_sample, knn, SpatialGrid,
};
use graspmap::scenegen::{generate_scene, SceneSpec};

fn main() -> graspmap::Result<()> {
    let scene = generate_scene(&SceneSpec::default())?;
    let cloud = depth_to_cloud(&scene.depth, scene.intrinsics(), 2)?;
    println!("cloud of {} points", cloud.len());

    let t = Instant::now();
    let picked = farthest_point_sample(&cloud.points, 512, 0)?;
    println!("fps 512: {:?} in {:.2} ms", &picked[..6], t.elapsed().as_secs_f64() * 1e3);

    let center = cloud.points[picked[1]];
    let brute = ball_query(&cloud.points, &center, 0.04, usize::MAX);
    let grid = SpatialGrid::new(&cloud.points, 0.02)?;
    let fast = grid.ball_query(&center, 0.04, usize::MAX);
    println!("ball of 4 cm: {} points, grid agrees: {}", brute.len(), brute == fast);

    let queries = [center];
    let nn = knn(&queries, &cloud.points, 8)?;
    println!("8 nearest: {:?}, grid agrees: {}", nn[0], grid.knn(&queries, 8)? == nn);

    let (with_normals, ok) = estimate_normals(&cloud, 16)?;
    let n = with_normals.normals.as_ref().expect("normals")[picked[1]];
    println!("normal at sample: {:.3?} ({} of {} well conditioned)", n, ok.iter().filter(|&&b| b).count(), ok.len());
    Ok(())
}
