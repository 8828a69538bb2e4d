//! Heatmap losses of perturbed maps against their targets, with a
//! finite-difference check of one gradient.
//!
//! Run with `cargo run --release --example losses`.

use graspmap::heatmap::{encode, perturb_heatmaps, HeatmapConfig, PixelGrasp};
use graspmap::losses::{confidence_focal, confidence_focal_grad, heatmap_losses, LossConfig};
use graspmap::scenegen::{generate_scene, SceneSpec};

fn main() -> graspmap::Result<()> {
    let scene = generate_scene(&SceneSpec::default())?;
    let hcfg = HeatmapConfig::default();
    let lcfg = LossConfig::default();
    let pixel: Vec<PixelGrasp> = scene.projected_labels().iter().map(PixelGrasp::from).collect();
    let target = encode(&pixel, &hcfg)?;

    for sigma in [0.0, 0.01, 0.05, 0.1] {
        let pred = perturb_heatmaps(&target, sigma, 7)?;
        let r = heatmap_losses(&pred, &target, &lcfg)?;
        println!("noise {sigma:.2}: total {:.5} {:?}", r.total, r.parts);
    }

    // Confidence gradient at one pixel against a central difference.
    let pred = perturb_heatmaps(&target, 0.05, 7)?.confidence;
    // A pixel on the Gaussian flank, where the target is strictly between 0 and 1.
    let (r, c) = scene.labels[0].grasp.pixel;
    let at = (r + 2, c);
    let g = confidence_focal_grad(&pred, &target.confidence, lcfg.alpha, lcfg.beta)?[at];
    let h = 1e-6;
    let (mut up, mut down) = (pred.clone(), pred.clone());
    up[at] += h;
    down[at] -= h;
    let fd = (confidence_focal(&up, &target.confidence, lcfg.alpha, lcfg.beta)?
        - confidence_focal(&down, &target.confidence, lcfg.alpha, lcfg.beta)?)
        / (2.0 * h);
    println!("gradient at {at:?}: analytic {g:.6e}, finite difference {fd:.6e}");
    Ok(())
}
