//! Select region centers from the confidence map and crop fixed-size point
//! groups around them.
//!
//! Run with `cargo run --release --example region_aggregation`.

use std::time::Instant;

use graspmap::aggregation::{select_centers, AggregationConfig, RegionIndex};
use graspmap::heatmap::{encode, HeatmapConfig, PixelGrasp};
use graspmap::pointops::depth_to_cloud;
use graspmap::scenegen::{generate_scene, SceneSpec};

fn main() -> graspmap::Result<()> {
    let scene = generate_scene(&SceneSpec { seed: 3, ..SceneSpec::default() })?;
    let hcfg = HeatmapConfig::default();
    let acfg = AggregationConfig {
        fusion_map: true,
        ..AggregationConfig::default()
    };
    let pixel: Vec<PixelGrasp> = scene.projected_labels().iter().map(PixelGrasp::from).collect();
    let maps = encode(&pixel, &hcfg)?;

    let centers = select_centers(&maps, &scene.depth, scene.intrinsics(), &hcfg, &acfg)?;
    let cloud = depth_to_cloud(&scene.depth, scene.intrinsics(), 2)?;
    let t = Instant::now();
    let index = RegionIndex::new(&cloud)?;
    let regions = index.aggregate(&centers, &acfg)?;
    println!(
        "{} centers, {} regions of {} points from {} cloud points in {:.1} ms",
        centers.len(),
        regions.len(),
        acfg.n_g,
        cloud.len(),
        t.elapsed().as_secs_f64() * 1e3
    );
    for r in regions.iter().take(6) {
        let c = &r.center;
        println!(
            "cell {:?} score {:.3} radius {:.3} theta {:+.3}: ball {} points, first fused pixel {:?}",
            c.cell,
            c.score,
            c.radius,
            c.theta,
            r.ball_size,
            r.pixel_knn.as_ref().map(|k| k[0][0])
        );
    }
    Ok(())
}
