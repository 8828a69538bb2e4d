//! Drive region decoding with teacher predictions built from the labels,
//! then suppress duplicates.
//!
//! Run with `cargo run --release --example teacher_decode`.

use graspmap::config::Config;
use graspmap::decode::{decode_region_traced, nms_indices, teacher_predictions};
use graspmap::pipeline::{run_aggregate, run_anchors, run_encode, PipelineInput};
use graspmap::scenegen::generate_scene;

fn main() -> graspmap::Result<()> {
    let cfg = Config::default();
    let scene = generate_scene(&cfg.scene)?;
    let input = PipelineInput::from_scene(&scene, &cfg)?;
    let anchors = run_anchors(&input.labels, &cfg)?;
    let (_, maps) = run_encode(&input, &cfg)?;
    let (_, regions) = run_aggregate(&input, &maps, &cfg)?;

    for exact in [true, false] {
        let preds = teacher_predictions(&input.labels, &regions, &anchors, &cfg.heatmap, exact)?;
        let mut decoded = Vec::new();
        for p in &preds {
            decoded.extend(decode_region_traced(p, &anchors, cfg.decode.threshold, cfg.decode.max_per_region)?);
        }
        let grasps: Vec<_> = decoded.iter().map(|d| d.grasp).collect();
        let kept = nms_indices(&grasps, cfg.decode.nms_translation, cfg.decode.nms_rotation);
        let worst = decoded
            .iter()
            .filter_map(|d| d.source.map(|s| (d.grasp.t - input.labels[s].pose.t).norm()))
            .fold(0.0, f64::max);
        println!(
            "exact offsets {exact}: {} predictions, {} decoded, {} after NMS, worst center error {:.4} m",
            preds.len(),
            decoded.len(),
            kept.len(),
            worst
        );
    }
    Ok(())
}
